#pragma once

#include "icode_lab/bptt.hpp"
#include "icode_lab/cli.hpp"
#include "icode_lab/contraction.hpp"
#include "icode_lab/harness.hpp"
#include "icode_lab/integrate.hpp"
#include "icode_lab/io.hpp"
#include "icode_lab/mat.hpp"
#include "icode_lab/metrics.hpp"
#include "icode_lab/models.hpp"
#include "icode_lab/nn.hpp"
#include "icode_lab/parallel.hpp"
#include "icode_lab/rng.hpp"
#include "icode_lab/signals.hpp"
#include "icode_lab/systems.hpp"
