#pragma once

// Measurements, residuals and co-state Jacobians for the PaLS absorption
// problem, with every PDE solve charged to a SolveLedger.
//
// Conventions: R = C^T A(p)^{-1} B - D is n_d x n_s. The residual vector r is
// R stacked column by column (source-major), so row j*n_d + i of the full
// Jacobian belongs to source j and detector i. For a sketch (W, V) the
// sketched residual is V^T R W (l_d x l_s) and row i*l_d + q of the sketched
// Jacobian belongs to source sample i and detector sample q, matching
// (W^T kron V^T) r.

#include <memory>
#include <optional>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "dotsketch/fdm.hpp"
#include "dotsketch/pals.hpp"
#include "dotsketch/sketching.hpp"

namespace dotsketch {

/// Counts of PDE work. Audit solves (true misfit checks done on the side)
/// are kept apart and never enter total().
class SolveLedger {
public:
    enum class Phase { pre_replacement, post_replacement };

    struct Counts {
        long forward_solves = 0;
        long adjoint_solves = 0;
        long function_evals = 0;
        long jacobian_evals = 0;
        long full_jacobian_events = 0;

        long total() const { return forward_solves + adjoint_solves; }
        Counts& operator+=(const Counts& o);
    };

    void set_phase(Phase phase) { phase_ = phase; }
    Phase phase() const { return phase_; }

    void charge_function(long forward_solves);
    void charge_jacobian(long adjoint_solves);
    void charge_full_jacobian(long forward_solves, long adjoint_solves);
    void charge_audit(long solves) { audit_solves_ += solves; }

    const Counts& counts(Phase phase) const { return phase == Phase::pre_replacement ? pre_ : post_; }
    Counts totals() const;
    long audit_solves() const { return audit_solves_; }

private:
    Counts& current() { return phase_ == Phase::pre_replacement ? pre_ : post_; }

    Phase phase_ = Phase::pre_replacement;
    Counts pre_;
    Counts post_;
    long audit_solves_ = 0;
};

/// Solves implied by nF function and nJ Jacobian evaluations with l_s/l_d
/// simultaneous sources/detectors plus full-Jacobian events (single
/// frequency).
long ledger_cost(long function_evals, long jacobian_evals, long source_samples, long detector_samples,
                 long full_jacobian_events, long n_sources, long n_detectors);

/// Static part of the forward problem: grid, layout, diffusion field and the
/// PaLS model. A(mu) = K + diag(w .* mu).
class DotModel {
public:
    DotModel(Grid2D grid, SourceDetectorLayout layout, Eigen::VectorXd diffusion, PalsModel pals,
             SolverOptions solver = {});

    const Grid2D& grid() const { return grid_; }
    const SourceDetectorLayout& layout() const { return layout_; }
    const PalsModel& pals() const { return pals_; }
    const Eigen::VectorXd& diffusion() const { return diffusion_; }
    const Eigen::MatrixX2d& points() const { return points_; }
    const Eigen::VectorXd& row_weights() const { return weights_; }
    Eigen::Index n_sources() const { return layout_.n_sources(); }
    Eigen::Index n_detectors() const { return layout_.n_detectors(); }
    Eigen::Index param_count() const { return pals_.param_count(); }

    SparseSystem system_for_absorption(const Eigen::VectorXd& mu) const;
    Eigen::VectorXd absorption(const ParamVector& p) const;

    /// C^T A(mu)^{-1} B for an arbitrary absorption field. Not charged.
    Eigen::MatrixXd measure_absorption(const Eigen::VectorXd& mu) const;

private:
    Grid2D grid_;
    SourceDetectorLayout layout_;
    Eigen::VectorXd diffusion_;
    PalsModel pals_;
    SolverOptions solver_;
    SpMat stiffness_;
    Eigen::VectorXd weights_;
    Eigen::MatrixX2d points_;
    Eigen::MatrixXd B_dense_;
};

/// Misfit machinery for one data set. Keeps the factorization and forward
/// solutions of the most recently evaluated (p, W) so a Jacobian at the same
/// point only pays for the adjoint solves.
class Objective {
public:
    Objective(const DotModel& model, Eigen::MatrixXd data, SolveLedger& ledger);

    const DotModel& model() const { return model_; }
    const Eigen::MatrixXd& data() const { return data_; }
    double data_norm2() const { return data_norm2_; }
    SolveLedger& ledger() { return ledger_; }

    /// C^T A(p)^{-1} B; n_s forward solves.
    Eigen::MatrixXd measure_full(const ParamVector& p);
    /// C^T A(p)^{-1} B - D; n_s forward solves.
    Eigen::MatrixXd residual_full(const ParamVector& p);
    /// ||R||_F^2 / ||D||_F^2 computed on the side (audit solves only).
    double audit_misfit(const ParamVector& p);

    /// V^T (C^T A^{-1} B W - D W); l_s forward solves.
    Eigen::MatrixXd sketched_residual(const ParamVector& p, const SketchPair& sketch);
    /// frob_estimate(sketch, R_s) / ||D||_F^2.
    double estimated_misfit(const SketchPair& sketch, const Eigen::MatrixXd& sketched) const;

    /// (n_d n_s) x n_p co-state Jacobian of r; n_d adjoint solves plus n_s
    /// forward solves (always recomputed). Charged as one full-Jacobian event.
    Eigen::MatrixXd jacobian_full(const ParamVector& p);

    /// (l_s l_d) x n_p sketched Jacobian; l_d adjoint solves. Forward
    /// solutions come from the last sketched_residual at the same (p, W);
    /// otherwise they are recomputed and charged as a function evaluation.
    Eigen::MatrixXd jacobian_sketched(const ParamVector& p, const SketchPair& sketch);

private:
    struct PointState {
        Eigen::VectorXd p;
        std::shared_ptr<SparseSystem> system;
        std::optional<Eigen::SparseMatrix<double>> dA;  ///< row weights .* dmu/dp, n x n_p
    };

    PointState& state_at(const ParamVector& p);
    const Eigen::SparseMatrix<double>& sensitivity(PointState& state);
    const Eigen::MatrixXd& forward_solutions(PointState& state, const SketchPair& sketch);

    const DotModel& model_;
    Eigen::MatrixXd data_;
    double data_norm2_;
    SolveLedger& ledger_;

    std::optional<PointState> state_;
    std::optional<Eigen::MatrixXd> cached_W_;
    Eigen::MatrixXd cached_Z_;
};

/// Sketched Jacobian contraction used by both routes: column k is
/// -vec(Y^T diag(dA_k) Z) with only the support of dA_k touched.
Eigen::MatrixXd costate_contract(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& Z,
                                 const Eigen::SparseMatrix<double>& dA);

}  // namespace dotsketch
