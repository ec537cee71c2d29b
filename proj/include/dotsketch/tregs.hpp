#pragma once

// Trust-region Gauss-Newton with regularized model steps.
//
// Each model problem J d ~ -r is solved by truncated SVD. The truncation
// level comes from a GCV score and is then lowered until the step fits the
// trust region; if even the leading direction is too long it is scaled back
// to the boundary. The outer loop is a standard ratio-test trust region on
// f = 1/2 ||r||^2.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dotsketch {

struct GnStep {
    Eigen::VectorXd step;
    double predicted_reduction = 0.0;  ///< m(0) - m(step) for the GN model of 1/2||r||^2
    Eigen::Index truncation = 0;       ///< singular triplets used
    Eigen::Index gcv_truncation = 0;   ///< GCV choice before the trust-region cut
    bool radius_limited = false;       ///< step was shortened by the trust region
    bool null_step = false;            ///< zero Jacobian or zero residual
    Eigen::VectorXd gcv_scores;        ///< score for k = 1..rank
};

/// GCV score for truncation k of an m-row problem: m ||r - U_k U_k^T r||^2 / (m-k)^2.
/// At k = m the projected residual vanishes and the score is taken as 0.
/// weight < 1 gives the weighted variant m ||.||^2 / (m - weight k)^2, which
/// penalizes extra triplets less.
double gcv_score(Eigen::Index m, Eigen::Index k, double projected_residual2, double weight = 1.0);

/// How a GCV step that is longer than the trust radius is shortened.
/// truncate: lower k until delta(k) fits (then the first non-fitting level
/// pulled back to the boundary is also tried). filter: keep the GCV triplets
/// and damp them, d_i = -sigma_i c_i / (sigma_i^2 + lambda), with lambda
/// chosen so the step lies on the boundary.
enum class StepRule { truncate, filter };

const char* to_string(StepRule rule);
StepRule parse_step_rule(const std::string& s);

GnStep gn_step(const Eigen::MatrixXd& J, const Eigen::VectorXd& r, double radius,
               StepRule rule = StepRule::truncate, double gcv_weight = 1.0);

/// Residual/Jacobian provider. jacobian(p) is only requested at the point
/// passed to the most recent successful residual() call or at the current
/// iterate.
class LeastSquaresProblem {
public:
    virtual ~LeastSquaresProblem() = default;
    virtual Eigen::VectorXd residual(const Eigen::VectorXd& p) = 0;
    virtual Eigen::MatrixXd jacobian(const Eigen::VectorXd& p) = 0;
};

struct TrOptions {
    double initial_radius = 1.0;
    double max_radius = 1e6;
    double min_radius = 1e-14;
    int max_iterations = 100;
    double accept_threshold = 1e-4;
    double tolerance = 0.0;  ///< stop once ||r||^2 <= tolerance
    StepRule step_rule = StepRule::truncate;
    double gcv_weight = 1.0;
};

struct TrHistoryRow {
    int iteration = 0;
    double misfit = 0.0;   ///< ||r||^2 at the iterate after this iteration
    double step_norm = 0.0;
    double radius = 0.0;   ///< radius used for the step
    double ratio = 0.0;    ///< actual / predicted reduction
    bool accepted = false;
    Eigen::Index truncation = 0;
};

enum class TrStatus { running, converged, max_iterations, radius_collapsed, null_step, stopped };

const char* to_string(TrStatus status);

struct TrState {
    Eigen::VectorXd p;
    double radius = 1.0;
    int iterations = 0;
    int accepted_steps = 0;
    std::optional<Eigen::VectorXd> residual;  ///< at p
    std::optional<Eigen::MatrixXd> jacobian;  ///< at p
    std::vector<TrHistoryRow> history;

    double misfit() const { return residual ? residual->squaredNorm() : 0.0; }
    /// Forget r and J at p (the objective changed, e.g. new sketch).
    void invalidate() {
        residual.reset();
        jacobian.reset();
    }
};

TrState make_tr_state(Eigen::VectorXd p0, const TrOptions& options);

/// Makes sure the residual at the current iterate is available.
void ensure_residual(LeastSquaresProblem& problem, TrState& state);

/// One trust-region iteration (step, trial evaluation, ratio test).
TrStatus tr_iterate(LeastSquaresProblem& problem, TrState& state, const TrOptions& options);

/// Iterates until the tolerance is met, the iteration budget
/// (options.max_iterations counted on state.iterations) is spent, the radius
/// collapses, or `stop` returns true after an accepted step.
TrStatus tr_loop(LeastSquaresProblem& problem, TrState& state, const TrOptions& options,
                 const std::function<bool(const TrState&)>& stop = {});

}  // namespace dotsketch
