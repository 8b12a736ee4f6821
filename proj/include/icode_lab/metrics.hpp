#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "icode_lab/mat.hpp"

namespace icode_lab {

// Pooled over every trajectory, grid point, and coordinate of the prediction
// segment. r2 uses SS_tot about the grand mean of the ground truth.
struct Metrics {
    double mse = 0.0;
    double mae = 0.0;
    double rmse = 0.0;
    double r2 = 0.0;
    std::vector<double> per_traj_mse;
};

inline nlohmann::json metrics_to_json(const Metrics& m) {
    return {{"mse", m.mse},
            {"mae", m.mae},
            {"rmse", m.rmse},
            {"r2", m.r2},
            {"r2_convention", "pooled"},
            {"per_traj_mse", m.per_traj_mse}};
}

// Accumulates squared/absolute error pairs; order of accumulation is the
// caller's responsibility (keep it index-ordered for reproducibility).
struct MetricsAccumulator {
    double ss_res = 0.0;
    double abs_sum = 0.0;
    double truth_sum = 0.0;
    double truth_sq_sum = 0.0;
    std::size_t count = 0;

    void add(double truth, double pred) {
        const double d = pred - truth;
        ss_res += d * d;
        abs_sum += std::fabs(d);
        truth_sum += truth;
        truth_sq_sum += truth * truth;
        count += 1;
    }

    void merge(const MetricsAccumulator& o) {
        ss_res += o.ss_res;
        abs_sum += o.abs_sum;
        truth_sum += o.truth_sum;
        truth_sq_sum += o.truth_sq_sum;
        count += o.count;
    }

    Metrics finish() const {
        if (count == 0) throw std::invalid_argument("metrics: no samples");
        Metrics m;
        const double nc = static_cast<double>(count);
        m.mse = ss_res / nc;
        m.mae = abs_sum / nc;
        m.rmse = std::sqrt(m.mse);
        const double mean = truth_sum / nc;
        const double ss_tot = truth_sq_sum - nc * mean * mean;
        m.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);
        return m;
    }
};

// Convenience for flat series (tests and small tools).
inline Metrics compute_metrics(const Vec& truth, const Vec& pred) {
    if (truth.size() != pred.size()) throw std::invalid_argument("metrics: length mismatch");
    MetricsAccumulator acc;
    for (std::size_t i = 0; i < truth.size(); ++i) acc.add(truth[i], pred[i]);
    return acc.finish();
}

}  // namespace icode_lab
