#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "icode_lab/mat.hpp"
#include "icode_lab/models.hpp"
#include "icode_lab/rng.hpp"

namespace icode_lab {

// J(x,u) = sum_i d f_i/dx + sum_j u_j * d k_j/dx.
inline Matrix model_jacobian(const IcodeModel& model, const Vec& x, const Vec& u,
                             MlpWorkspace& ws) {
    if (x.size() != model.n || u.size() != model.m)
        throw std::invalid_argument("model_jacobian: dim mismatch");
    Matrix J(model.n, model.n);
    for (const auto& f : model.f_nets) {
        Matrix Jf = mlp_input_jacobian(f, x, ws);
        for (std::size_t i = 0; i < J.data.size(); ++i) J.data[i] += Jf.data[i];
    }
    for (std::size_t j = 0; j < model.m; ++j) {
        Matrix Jk = mlp_input_jacobian(model.k_nets[j], x, ws);
        for (std::size_t i = 0; i < J.data.size(); ++i) J.data[i] += u[j] * Jk.data[i];
    }
    return J;
}

inline Matrix model_jacobian(const IcodeModel& model, const Vec& x, const Vec& u) {
    MlpWorkspace ws;
    return model_jacobian(model, x, u, ws);
}

namespace detail {

inline double offdiag_norm(const Matrix& A) {
    double s = 0.0;
    for (std::size_t i = 0; i < A.rows; ++i)
        for (std::size_t j = 0; j < A.cols; ++j)
            if (i != j) s += A(i, j) * A(i, j);
    return std::sqrt(s);
}

}  // namespace detail

// Largest eigenvalue of (A+A^T)/2 by cyclic Jacobi rotations, run until the
// off-diagonal norm drops below 1e-12.
inline double symmetric_max_eig(const Matrix& A) {
    if (A.rows != A.cols) throw std::invalid_argument("symmetric_max_eig: matrix must be square");
    const std::size_t n = A.rows;
    if (n == 0) throw std::invalid_argument("symmetric_max_eig: empty matrix");
    Matrix S(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) S(i, j) = 0.5 * (A(i, j) + A(j, i));
    if (n == 1) return S(0, 0);

    const double tol = 1e-12;
    for (int sweep = 0; sweep < 100; ++sweep) {
        if (detail::offdiag_norm(S) < tol) break;
        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = S(p, q);
                if (apq == 0.0) continue;
                const double theta = (S(q, q) - S(p, p)) / (2.0 * apq);
                const double t =
                    (theta >= 0.0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double skp = S(k, p), skq = S(k, q);
                    S(k, p) = c * skp - s * skq;
                    S(k, q) = s * skp + c * skq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double spk = S(p, k), sqk = S(q, k);
                    S(p, k) = c * spk - s * sqk;
                    S(q, k) = s * spk + c * sqk;
                }
            }
    }
    if (detail::offdiag_norm(S) >= 1e-6)
        throw std::runtime_error("symmetric_max_eig: Jacobi iteration did not converge");
    double lam = S(0, 0);
    for (std::size_t i = 1; i < n; ++i) lam = std::fmax(lam, S(i, i));
    return lam;
}

// Contraction rate under a constant metric factor L:
// R = L J L^{-1}; returns lambda_max((R+R^T)/2).
inline double metric_transformed_max_eig(const IcodeModel& model, const Matrix& L, const Vec& x,
                                         const Vec& u) {
    if (L.rows != model.n || L.cols != model.n)
        throw std::invalid_argument("metric_transformed_max_eig: L must be n x n");
    const Matrix J = model_jacobian(model, x, u);
    const Matrix R = matmul(matmul(L, J), inverse(L));
    return symmetric_max_eig(R);
}

struct Box {
    Vec lo, hi;

    void validate() const {
        if (lo.size() != hi.size()) throw std::invalid_argument("Box: lo/hi length mismatch");
        for (std::size_t i = 0; i < lo.size(); ++i)
            if (!(hi[i] >= lo[i])) throw std::invalid_argument("Box: hi must be >= lo");
    }
};

inline Box box_from_json(const nlohmann::json& j) {
    Box b;
    b.lo = j.at("lo").get<Vec>();
    b.hi = j.at("hi").get<Vec>();
    b.validate();
    return b;
}

struct ContractionReport {
    std::size_t samples = 0;
    double c_required = 0.0;
    double worst_lambda = 0.0;
    Vec witness_x, witness_u;
    bool certified = false;

    std::string verdict() const { return certified ? "certified-on-samples" : "violated"; }
};

// Scans lambda_max((J+J^T)/2) over low-discrepancy samples of the given
// boxes. Sample-based: a falsifier/estimator, not a proof over all (x,u).
// Worst case is the largest lambda; ties keep the smallest sample index.
inline ContractionReport contraction_scan(const IcodeModel& model, const Box& x_box,
                                          const Box& u_box, std::size_t samples,
                                          double c_required, std::uint64_t seed) {
    x_box.validate();
    u_box.validate();
    if (x_box.lo.size() != model.n || u_box.lo.size() != model.m)
        throw std::invalid_argument("contraction_scan: box dims must match model");
    if (samples == 0) throw std::invalid_argument("contraction_scan: samples must be > 0");

    HaltonSampler halton(model.n + model.m, seed);
    MlpWorkspace ws;
    Vec x(model.n), u(model.m);
    ContractionReport rep;
    rep.samples = samples;
    rep.c_required = c_required;
    rep.worst_lambda = -std::numeric_limits<double>::infinity();

    for (std::size_t i = 0; i < samples; ++i) {
        for (std::size_t d = 0; d < model.n; ++d)
            x[d] = x_box.lo[d] + halton.point(i, d) * (x_box.hi[d] - x_box.lo[d]);
        for (std::size_t d = 0; d < model.m; ++d)
            u[d] = u_box.lo[d] + halton.point(i, model.n + d) * (u_box.hi[d] - u_box.lo[d]);
        const double lam = symmetric_max_eig(model_jacobian(model, x, u, ws));
        if (lam > rep.worst_lambda) {
            rep.worst_lambda = lam;
            rep.witness_x = x;
            rep.witness_u = u;
        }
    }
    rep.certified = rep.worst_lambda <= -c_required;
    return rep;
}

inline nlohmann::json report_to_json(const ContractionReport& rep) {
    return {{"samples", rep.samples},
            {"c_required", rep.c_required},
            {"worst_lambda", rep.worst_lambda},
            {"witness_x", rep.witness_x},
            {"witness_u", rep.witness_u},
            {"verdict", rep.verdict()},
            {"note", "sample-based scan; certifies only the sampled points, not all (x,u)"}};
}

}  // namespace icode_lab
