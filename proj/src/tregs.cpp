#include "dotsketch/tregs.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/SVD>

namespace dotsketch {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

const char* to_string(TrStatus status) {
    switch (status) {
        case TrStatus::running: return "running";
        case TrStatus::converged: return "converged";
        case TrStatus::max_iterations: return "max_iterations";
        case TrStatus::radius_collapsed: return "radius_collapsed";
        case TrStatus::null_step: return "null_step";
        case TrStatus::stopped: return "stopped";
    }
    return "unknown";
}

const char* to_string(StepRule rule) { return rule == StepRule::truncate ? "truncate" : "filter"; }

StepRule parse_step_rule(const std::string& s) {
    if (s == "truncate") return StepRule::truncate;
    if (s == "filter") return StepRule::filter;
    throw std::invalid_argument("unknown step rule: " + s);
}

namespace {

// ||d(lambda)|| = radius for d_i = sigma_i c_i / (sigma_i^2 + lambda); the
// norm decreases in lambda, so bisect on log(lambda).
double boundary_lambda(const VectorXd& sigma, const VectorXd& c, double radius) {
    auto norm2 = [&](double lambda) {
        return (sigma.array() * c.array() / (sigma.array().square() + lambda)).square().sum();
    };
    double lo = 0.0;
    double hi = sigma(0) * sigma(0);
    while (norm2(hi) > radius * radius) hi *= 4.0;
    double lo_pos = hi * 1e-30;
    if (norm2(lo_pos) <= radius * radius) lo_pos = 0.0;
    lo = lo_pos;
    for (int it = 0; it < 200; ++it) {
        const double mid = lo > 0.0 ? std::sqrt(lo * hi) : 0.5 * hi;
        if (norm2(mid) > radius * radius) lo = mid;
        else hi = mid;
        if (lo > 0.0 && hi / lo < 1.0 + 1e-12) break;
    }
    return hi;
}

}  // namespace

double gcv_score(Index m, Index k, double projected_residual2, double weight) {
    if (k < 0 || k > m) throw std::invalid_argument("gcv_score: truncation out of range");
    if (!(weight > 0.0 && weight <= 1.0)) throw std::invalid_argument("gcv_score: weight must be in (0, 1]");
    if (k == m) return 0.0;
    const double dof = static_cast<double>(m) - weight * static_cast<double>(k);
    return static_cast<double>(m) * projected_residual2 / (dof * dof);
}

GnStep gn_step(const MatrixXd& J, const VectorXd& r, double radius, StepRule rule, double gcv_weight) {
    if (J.rows() != r.size()) throw std::invalid_argument("gn_step: Jacobian/residual size mismatch");
    if (J.rows() < 1) throw std::invalid_argument("gn_step: empty residual");
    if (!(radius > 0.0)) throw std::invalid_argument("gn_step: trust radius must be positive");

    GnStep out;
    out.step = VectorXd::Zero(J.cols());
    const Index m = J.rows();
    const double r2 = r.squaredNorm();

    Eigen::JacobiSVD<MatrixXd> svd(J, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const VectorXd& sigma = svd.singularValues();
    const double cutoff = sigma.size() ? sigma(0) * std::numeric_limits<double>::epsilon() *
                                             static_cast<double>(std::max(J.rows(), J.cols()))
                                       : 0.0;
    Index rank = 0;
    while (rank < sigma.size() && sigma(rank) > cutoff) ++rank;
    if (rank == 0 || r2 == 0.0) {
        out.null_step = true;
        return out;
    }

    const MatrixXd U = svd.matrixU().leftCols(rank);
    const MatrixXd Y = svd.matrixV().leftCols(rank);
    const VectorXd c = U.transpose() * r;
    const double outside = (r - U * c).squaredNorm();

    // Projected residuals ||r - U_k U_k^T r||^2 as tail sums (no cancellation).
    VectorXd tail(rank + 1);
    tail(rank) = outside;
    for (Index i = rank - 1; i >= 0; --i) tail(i) = tail(i + 1) + c(i) * c(i);

    out.gcv_scores.resize(rank);
    double best = std::numeric_limits<double>::infinity();
    for (Index k = 1; k <= rank; ++k) {
        out.gcv_scores(k - 1) = gcv_score(m, k, tail(k), gcv_weight);
        best = std::min(best, out.gcv_scores(k - 1));
    }
    // Smallest k whose score ties the minimum (rounding-level ties included).
    const double tie = best * (1.0 + 1e-10) + 1e-24 * r2;
    Index k_gcv = rank;
    for (Index k = 1; k <= rank; ++k) {
        if (out.gcv_scores(k - 1) <= tie) {
            k_gcv = k;
            break;
        }
    }
    out.gcv_truncation = k_gcv;

    // Step norms grow with k; keep the largest k <= k_gcv that fits.
    VectorXd coef(rank);
    for (Index i = 0; i < rank; ++i) coef(i) = -c(i) / sigma(i);
    auto model_reduction = [&](const VectorXd& d) {
        const VectorXd Jd = J * d;
        return -(r.dot(Jd) + 0.5 * Jd.squaredNorm());
    };

    if (rule == StepRule::filter) {
        out.truncation = k_gcv;
        const double full2 = coef.head(k_gcv).squaredNorm();
        if (full2 <= radius * radius) {
            out.step = Y.leftCols(k_gcv) * coef.head(k_gcv);
        } else {
            const VectorXd s = sigma.head(k_gcv);
            const VectorXd cc = c.head(k_gcv);
            const double lambda = boundary_lambda(s, cc, radius);
            const VectorXd d = -(s.array() * cc.array() / (s.array().square() + lambda)).matrix();
            out.step = Y.leftCols(k_gcv) * d;
            if (out.step.norm() > radius) out.step *= radius / out.step.norm();
            out.radius_limited = true;
        }
        out.predicted_reduction = model_reduction(out.step);
        return out;
    }

    Index k = k_gcv;
    double norm2 = coef.head(k).squaredNorm();
    while (k > 1 && norm2 > radius * radius) {
        --k;
        norm2 = coef.head(k).squaredNorm();
    }
    out.truncation = k;
    out.radius_limited = k < k_gcv;
    out.step = Y.leftCols(k) * coef.head(k);
    if (norm2 > radius * radius) {
        out.step *= radius / std::sqrt(norm2);
        out.radius_limited = true;
    }
    out.predicted_reduction = model_reduction(out.step);

    // The first truncation that did not fit, pulled back to the boundary, can
    // be much better than a short fitting step.
    if (k < k_gcv && norm2 <= radius * radius) {
        const VectorXd next = Y.leftCols(k + 1) * coef.head(k + 1);
        const VectorXd scaled = next * (radius / next.norm());
        const double pred = model_reduction(scaled);
        if (pred > out.predicted_reduction) {
            out.step = scaled;
            out.truncation = k + 1;
            out.predicted_reduction = pred;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

TrState make_tr_state(VectorXd p0, const TrOptions& options) {
    if (!(options.initial_radius > 0.0)) throw std::invalid_argument("initial trust radius must be positive");
    TrState s;
    s.p = std::move(p0);
    s.radius = options.initial_radius;
    return s;
}

void ensure_residual(LeastSquaresProblem& problem, TrState& state) {
    if (state.residual) return;
    VectorXd r = problem.residual(state.p);
    if (!r.allFinite()) throw std::runtime_error("residual at the current iterate is not finite");
    state.residual = std::move(r);
    state.jacobian.reset();
}

TrStatus tr_iterate(LeastSquaresProblem& problem, TrState& state, const TrOptions& options) {
    ensure_residual(problem, state);
    if (!state.jacobian) state.jacobian = problem.jacobian(state.p);

    const GnStep g = gn_step(*state.jacobian, *state.residual, state.radius, options.step_rule, options.gcv_weight);
    if (g.null_step || !(g.predicted_reduction > 0.0)) return TrStatus::null_step;

    const VectorXd trial = state.p + g.step;
    VectorXd r_trial;
    bool finite = true;
    try {
        r_trial = problem.residual(trial);
        finite = r_trial.allFinite();
    } catch (const std::runtime_error&) {
        finite = false;
    }

    const double f = 0.5 * state.residual->squaredNorm();
    double ratio = -std::numeric_limits<double>::infinity();
    if (finite) ratio = (f - 0.5 * r_trial.squaredNorm()) / g.predicted_reduction;
    const bool accepted = finite && ratio > options.accept_threshold;

    TrHistoryRow row;
    row.iteration = ++state.iterations;
    row.step_norm = g.step.norm();
    row.radius = state.radius;
    row.ratio = ratio;
    row.accepted = accepted;
    row.truncation = g.truncation;

    if (accepted) {
        state.p = trial;
        state.residual = std::move(r_trial);
        state.jacobian.reset();
        ++state.accepted_steps;
    }
    if (!finite || ratio < 0.25) {
        state.radius /= 4.0;
    } else if (ratio > 0.75 && g.radius_limited) {
        state.radius = std::min(2.0 * state.radius, options.max_radius);
    }
    row.misfit = state.misfit();
    state.history.push_back(row);

    if (state.misfit() <= options.tolerance) return TrStatus::converged;
    if (state.radius < options.min_radius) return TrStatus::radius_collapsed;
    return TrStatus::running;
}

TrStatus tr_loop(LeastSquaresProblem& problem, TrState& state, const TrOptions& options,
                 const std::function<bool(const TrState&)>& stop) {
    ensure_residual(problem, state);
    if (state.history.empty()) {
        TrHistoryRow row0;
        row0.misfit = state.misfit();
        row0.radius = state.radius;
        row0.accepted = true;
        state.history.push_back(row0);
    }
    if (state.misfit() <= options.tolerance) return TrStatus::converged;
    if (stop && stop(state)) return TrStatus::stopped;

    while (state.iterations < options.max_iterations) {
        const TrStatus st = tr_iterate(problem, state, options);
        if (st != TrStatus::running) return st;
        if (stop && state.history.back().accepted && stop(state)) return TrStatus::stopped;
    }
    return TrStatus::max_iterations;
}

}  // namespace dotsketch
