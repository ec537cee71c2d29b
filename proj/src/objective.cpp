#include "dotsketch/objective.hpp"

#include <stdexcept>
#include <vector>

namespace dotsketch {

SolveLedger::Counts& SolveLedger::Counts::operator+=(const Counts& o) {
    forward_solves += o.forward_solves;
    adjoint_solves += o.adjoint_solves;
    function_evals += o.function_evals;
    jacobian_evals += o.jacobian_evals;
    full_jacobian_events += o.full_jacobian_events;
    return *this;
}

void SolveLedger::charge_function(long forward_solves) {
    current().forward_solves += forward_solves;
    current().function_evals += 1;
}

void SolveLedger::charge_jacobian(long adjoint_solves) {
    current().adjoint_solves += adjoint_solves;
    current().jacobian_evals += 1;
}

void SolveLedger::charge_full_jacobian(long forward_solves, long adjoint_solves) {
    current().forward_solves += forward_solves;
    current().adjoint_solves += adjoint_solves;
    current().full_jacobian_events += 1;
}

SolveLedger::Counts SolveLedger::totals() const {
    Counts c = pre_;
    c += post_;
    return c;
}

long ledger_cost(long function_evals, long jacobian_evals, long source_samples, long detector_samples,
                 long full_jacobian_events, long n_sources, long n_detectors) {
    return function_evals * source_samples + jacobian_evals * detector_samples +
           full_jacobian_events * (n_sources + n_detectors);
}

// ---------------------------------------------------------------------------

DotModel::DotModel(Grid2D grid, SourceDetectorLayout layout, Eigen::VectorXd diffusion, PalsModel pals,
                   SolverOptions solver)
    : grid_(std::move(grid)),
      layout_(std::move(layout)),
      diffusion_(std::move(diffusion)),
      pals_(pals),
      solver_(solver) {
    pals_.validate();
    if (diffusion_.size() != grid_.size()) throw std::invalid_argument("diffusion field does not match grid");
    if (layout_.B.rows() != grid_.size() || layout_.C.rows() != grid_.size()) {
        throw std::invalid_argument("source/detector layout does not match grid");
    }
    stiffness_ = assemble_diffusion(grid_, {diffusion_.data(), static_cast<std::size_t>(diffusion_.size())});
    weights_ = grid_.row_weights();
    points_ = grid_.points();
    B_dense_ = Eigen::MatrixXd(layout_.B);
}

SparseSystem DotModel::system_for_absorption(const Eigen::VectorXd& mu) const {
    if (mu.size() != grid_.size()) throw std::invalid_argument("absorption field does not match grid");
    if ((mu.array() < 0.0).any()) throw std::invalid_argument("absorption must be non-negative");
    SpMat A = stiffness_;
    for (Index n = 0; n < A.rows(); ++n) A.coeffRef(n, n) += weights_(n) * mu(n);
    return SparseSystem(std::move(A), solver_);
}

Eigen::VectorXd DotModel::absorption(const ParamVector& p) const { return mu_from_pals(pals_, p, points_); }

Eigen::MatrixXd DotModel::measure_absorption(const Eigen::VectorXd& mu) const {
    const SparseSystem sys = system_for_absorption(mu);
    return layout_.C.transpose() * sys.solve_forward(B_dense_);
}

// ---------------------------------------------------------------------------

Objective::Objective(const DotModel& model, Eigen::MatrixXd data, SolveLedger& ledger)
    : model_(model), data_(std::move(data)), data_norm2_(data_.squaredNorm()), ledger_(ledger) {
    if (data_.rows() != model_.n_detectors() || data_.cols() != model_.n_sources()) {
        throw std::invalid_argument("measured data must be n_d x n_s");
    }
    if (!(data_norm2_ > 0.0)) throw std::invalid_argument("measured data is identically zero");
}

Objective::PointState& Objective::state_at(const ParamVector& p) {
    if (p.size() != model_.param_count()) throw std::invalid_argument("parameter vector has wrong length");
    if (state_ && state_->p.size() == p.size() && state_->p == p.values()) return *state_;
    state_.reset();
    cached_W_.reset();
    PointState s;
    s.p = p.values();
    s.system = std::make_shared<SparseSystem>(model_.system_for_absorption(model_.absorption(p)));
    state_ = std::move(s);
    return *state_;
}

const Eigen::SparseMatrix<double>& Objective::sensitivity(PointState& state) {
    if (!state.dA) {
        Eigen::SparseMatrix<double> S = dmu_dp_sparse(model_.pals(), ParamVector(state.p), model_.points());
        state.dA = model_.row_weights().asDiagonal() * S;
        state.dA->prune(0.0);
    }
    return *state.dA;
}

const Eigen::MatrixXd& Objective::forward_solutions(PointState& state, const SketchPair& sketch) {
    if (cached_W_ && cached_W_->rows() == sketch.W.rows() && cached_W_->cols() == sketch.W.cols() &&
        *cached_W_ == sketch.W) {
        return cached_Z_;
    }
    const Eigen::MatrixXd rhs = sketch.identity ? Eigen::MatrixXd(model_.layout().B)
                                                : Eigen::MatrixXd(model_.layout().B * sketch.W);
    cached_Z_ = state.system->solve_forward(rhs);
    cached_W_ = sketch.W;
    ledger_.charge_function(rhs.cols());
    return cached_Z_;
}

Eigen::MatrixXd Objective::measure_full(const ParamVector& p) {
    PointState& s = state_at(p);
    const Eigen::MatrixXd Z = s.system->solve_forward(Eigen::MatrixXd(model_.layout().B));
    ledger_.charge_function(model_.n_sources());
    return model_.layout().C.transpose() * Z;
}

Eigen::MatrixXd Objective::residual_full(const ParamVector& p) { return measure_full(p) - data_; }

double Objective::audit_misfit(const ParamVector& p) {
    PointState& s = state_at(p);
    const Eigen::MatrixXd Z = s.system->solve_forward(Eigen::MatrixXd(model_.layout().B));
    ledger_.charge_audit(model_.n_sources());
    return (model_.layout().C.transpose() * Z - data_).squaredNorm() / data_norm2_;
}

Eigen::MatrixXd Objective::sketched_residual(const ParamVector& p, const SketchPair& sketch) {
    if (sketch.W.rows() != model_.n_sources() || sketch.V.rows() != model_.n_detectors()) {
        throw std::invalid_argument("sketch does not conform to the source/detector layout");
    }
    PointState& s = state_at(p);
    cached_W_.reset();
    const Eigen::MatrixXd& Z = forward_solutions(s, sketch);
    const Eigen::MatrixXd CtZ = model_.layout().C.transpose() * Z;
    if (sketch.identity) return CtZ - data_;
    return sketch.V.transpose() * (CtZ - data_ * sketch.W);
}

double Objective::estimated_misfit(const SketchPair& sketch, const Eigen::MatrixXd& sketched) const {
    return frob_estimate(sketch, sketched) / data_norm2_;
}

Eigen::MatrixXd Objective::jacobian_full(const ParamVector& p) {
    PointState& s = state_at(p);
    const Eigen::MatrixXd Z = s.system->solve_forward(Eigen::MatrixXd(model_.layout().B));
    const Eigen::MatrixXd Y = s.system->solve_adjoint(Eigen::MatrixXd(model_.layout().C));
    ledger_.charge_full_jacobian(model_.n_sources(), model_.n_detectors());
    return costate_contract(Y, Z, sensitivity(s));
}

Eigen::MatrixXd Objective::jacobian_sketched(const ParamVector& p, const SketchPair& sketch) {
    PointState& s = state_at(p);
    const Eigen::MatrixXd& Z = forward_solutions(s, sketch);
    const Eigen::MatrixXd rhs = sketch.identity ? Eigen::MatrixXd(model_.layout().C)
                                                : Eigen::MatrixXd(model_.layout().C * sketch.V);
    const Eigen::MatrixXd Y = s.system->solve_adjoint(rhs);
    ledger_.charge_jacobian(rhs.cols());
    return costate_contract(Y, Z, sensitivity(s));
}

Eigen::MatrixXd costate_contract(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& Z,
                                 const Eigen::SparseMatrix<double>& dA) {
    if (Y.rows() != dA.rows() || Z.rows() != dA.rows()) throw std::invalid_argument("costate_contract: size mismatch");
    const Index ld = Y.cols();
    const Index ls = Z.cols();
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(ld * ls, dA.cols());
    std::vector<Index> idx;
    for (Index k = 0; k < dA.outerSize(); ++k) {
        idx.clear();
        std::vector<double> val;
        for (Eigen::SparseMatrix<double>::InnerIterator it(dA, k); it; ++it) {
            idx.push_back(it.row());
            val.push_back(it.value());
        }
        if (idx.empty()) continue;
        const Eigen::Map<const Eigen::VectorXd> w(val.data(), static_cast<Index>(val.size()));
        const Eigen::MatrixXd Ys = Y(idx, Eigen::all);
        const Eigen::MatrixXd Zs = w.asDiagonal() * Z(idx, Eigen::all);
        const Eigen::MatrixXd M = Ys.transpose() * Zs;  // l_d x l_s
        J.col(k) = -Eigen::Map<const Eigen::VectorXd>(M.data(), M.size());
    }
    return J;
}

}  // namespace dotsketch
