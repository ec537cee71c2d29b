#include "dotsketch/fdm.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

namespace dotsketch {

namespace {

double harmonic(double d1, double d2) { return 2.0 * d1 * d2 / (d1 + d2); }

void check_fields(const Grid2D& grid, std::span<const double> diffusion,
                  std::span<const double> absorption) {
    if (static_cast<Index>(diffusion.size()) != grid.size()) {
        throw std::invalid_argument("diffusion field length does not match the grid");
    }
    if (static_cast<Index>(absorption.size()) != grid.size()) {
        throw std::invalid_argument("absorption field length does not match the grid");
    }
    for (double d : diffusion) {
        if (!(d > 0.0)) throw std::invalid_argument("diffusion coefficient must be positive");
    }
    for (double m : absorption) {
        if (!(m >= 0.0)) throw std::invalid_argument("absorption coefficient must be non-negative");
    }
}

}  // namespace

Grid2D::Grid2D(int nx, int ny, double a, double c) : nx_(nx), ny_(ny), a_(a), c_(c) {
    if (nx < 3 || ny < 3) throw std::invalid_argument("grid needs at least 3 nodes per axis");
    if (!(a > 0.0) || !(c > 0.0)) throw std::invalid_argument("domain extents must be positive");
    hx_ = 2.0 * a / (nx - 1);
    hy_ = c / (ny - 1);
}

NodeTag Grid2D::tag(Index n) const {
    auto [i, j] = ij(n);
    if (i == 0 || i == nx_ - 1) return NodeTag::dirichlet_side;
    if (j == 0) return NodeTag::robin_top;
    if (j == ny_ - 1) return NodeTag::robin_bottom;
    return NodeTag::interior;
}

double Grid2D::row_weight(Index n) const {
    switch (tag(n)) {
        case NodeTag::dirichlet_side: return 0.0;
        case NodeTag::robin_top:
        case NodeTag::robin_bottom: return 0.5;
        case NodeTag::interior: break;
    }
    return 1.0;
}

Eigen::VectorXd Grid2D::row_weights() const {
    Eigen::VectorXd w(size());
    for (Index n = 0; n < size(); ++n) w(n) = row_weight(n);
    return w;
}

Eigen::MatrixX2d Grid2D::points() const {
    Eigen::MatrixX2d pts(size(), 2);
    for (int j = 0; j < ny_; ++j) {
        for (int i = 0; i < nx_; ++i) {
            pts(node(i, j), 0) = x(i);
            pts(node(i, j), 1) = y(j);
        }
    }
    return pts;
}

Grid2D build_grid(int nx, int ny, double a, double c) { return Grid2D(nx, ny, a, c); }

SpMat assemble_matrix(const Grid2D& grid, std::span<const double> diffusion,
                      std::span<const double> absorption) {
    check_fields(grid, diffusion, absorption);
    const int nx = grid.nx();
    const int ny = grid.ny();
    const double ihx2 = 1.0 / (grid.hx() * grid.hx());
    const double ihy2 = 1.0 / (grid.hy() * grid.hy());

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(grid.size()) * 5);

    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const Index n = grid.node(i, j);
            const NodeTag t = grid.tag(n);
            if (t == NodeTag::dirichlet_side) {
                trip.emplace_back(n, n, 1.0);
                continue;
            }
            const double w = grid.row_weight(n);
            const double dn = diffusion[n];
            double diag = w * absorption[n];

            for (int di : {-1, 1}) {
                const Index m = grid.node(i + di, j);
                const double coef = w * harmonic(dn, diffusion[m]) * ihx2;
                diag += coef;
                if (grid.tag(m) != NodeTag::dirichlet_side) trip.emplace_back(n, m, -coef);
            }

            if (t == NodeTag::interior) {
                for (int dj : {-1, 1}) {
                    const Index m = grid.node(i, j + dj);
                    const double coef = harmonic(dn, diffusion[m]) * ihy2;
                    diag += coef;
                    trip.emplace_back(n, m, -coef);
                }
            } else {
                // Ghost node mirrored through the face, eliminated with the
                // Robin relation; the row is then halved (w = 1/2).
                const Index m = grid.node(i, t == NodeTag::robin_top ? 1 : ny - 2);
                const double df = harmonic(dn, diffusion[m]);
                const double coef = w * 2.0 * df * ihy2;
                diag += coef + w * (df / dn) / grid.hy();
                trip.emplace_back(n, m, -coef);
            }
            trip.emplace_back(n, n, diag);
        }
    }

    SpMat A(grid.size(), grid.size());
    A.setFromTriplets(trip.begin(), trip.end());
    A.makeCompressed();
    return A;
}

SpMat assemble_diffusion(const Grid2D& grid, std::span<const double> diffusion) {
    std::vector<double> zero(static_cast<std::size_t>(grid.size()), 0.0);
    return assemble_matrix(grid, diffusion, zero);
}

SparseSystem assemble_system(const Grid2D& grid, std::span<const double> diffusion,
                             std::span<const double> absorption, SolverOptions options) {
    return SparseSystem(assemble_matrix(grid, diffusion, absorption), options);
}

Eigen::VectorXd robin_load(const Grid2D& grid, std::span<const double> diffusion,
                           std::span<const double> top, std::span<const double> bottom) {
    if (static_cast<Index>(diffusion.size()) != grid.size() ||
        static_cast<int>(top.size()) != grid.nx() || static_cast<int>(bottom.size()) != grid.nx()) {
        throw std::invalid_argument("robin_load: inconsistent field lengths");
    }
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(grid.size());
    for (int i = 1; i < grid.nx() - 1; ++i) {
        for (int face = 0; face < 2; ++face) {
            const int j = face == 0 ? 0 : grid.ny() - 1;
            const int jn = face == 0 ? 1 : grid.ny() - 2;
            const Index n = grid.node(i, j);
            const double df = harmonic(diffusion[n], diffusion[grid.node(i, jn)]);
            const double g = face == 0 ? top[i] : bottom[i];
            rhs(n) += 2.0 * g * (df / diffusion[n]) / grid.hy();
        }
    }
    return rhs;
}

Eigen::VectorXd volume_load(const Grid2D& grid, std::span<const double> source) {
    if (static_cast<Index>(source.size()) != grid.size()) {
        throw std::invalid_argument("volume_load: source length does not match the grid");
    }
    Eigen::VectorXd rhs(grid.size());
    for (Index n = 0; n < grid.size(); ++n) rhs(n) = grid.row_weight(n) * source[n];
    return rhs;
}

// ---------------------------------------------------------------------------

struct SparseSystem::Factorization {
    Eigen::SimplicialLDLT<SpMat> ldlt;
    Eigen::SparseLU<SpMat> lu;
    Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper, Eigen::IncompleteCholesky<double>> cg;
    Eigen::BiCGSTAB<SpMat, Eigen::IncompleteLUT<double>> bicg;
    Eigen::BiCGSTAB<SpMat, Eigen::IncompleteLUT<double>> bicg_t;
    SpMat At;
};

SparseSystem::SparseSystem(SpMat A, SolverOptions options)
    : A_(std::move(A)), options_(options), fact_(std::make_unique<Factorization>()) {
    if (A_.rows() != A_.cols()) throw std::invalid_argument("system matrix must be square");
    A_.makeCompressed();
    const SpMat At = A_.transpose();
    symmetric_ = (A_ - At).norm() <= 1e-14 * A_.norm();

    if (options_.method == SolverOptions::Method::direct) {
        if (symmetric_) {
            fact_->ldlt.compute(A_);
            if (fact_->ldlt.info() != Eigen::Success) throw SolverError("sparse LDL^T factorization failed");
        } else {
            fact_->lu.compute(A_);
            if (fact_->lu.info() != Eigen::Success) {
                throw SolverError("sparse LU factorization failed: " + fact_->lu.lastErrorMessage());
            }
        }
    } else if (symmetric_) {
        fact_->cg.setTolerance(options_.lin_tol);
        fact_->cg.setMaxIterations(options_.max_iterations);
        fact_->cg.compute(A_);
        if (fact_->cg.info() != Eigen::Success) throw SolverError("incomplete Cholesky preconditioner failed");
    } else {
        fact_->At = At;
        for (auto* s : {&fact_->bicg, &fact_->bicg_t}) {
            s->setTolerance(options_.lin_tol);
            s->setMaxIterations(options_.max_iterations);
        }
        fact_->bicg.compute(A_);
        fact_->bicg_t.compute(fact_->At);
        if (fact_->bicg.info() != Eigen::Success || fact_->bicg_t.info() != Eigen::Success) {
            throw SolverError("incomplete LU preconditioner failed");
        }
    }
}

SparseSystem::~SparseSystem() = default;
SparseSystem::SparseSystem(SparseSystem&&) noexcept = default;
SparseSystem& SparseSystem::operator=(SparseSystem&&) noexcept = default;

Eigen::MatrixXd SparseSystem::solve_forward(const Eigen::MatrixXd& rhs) const {
    return solve_impl(rhs, false);
}

Eigen::MatrixXd SparseSystem::solve_adjoint(const Eigen::MatrixXd& rhs) const {
    return solve_impl(rhs, true);
}

Eigen::MatrixXd SparseSystem::solve_impl(const Eigen::MatrixXd& rhs, bool transposed) const {
    if (rhs.rows() != A_.rows()) throw std::invalid_argument("right-hand side has wrong row count");
    Eigen::MatrixXd out(rhs.rows(), rhs.cols());
    if (rhs.cols() == 0) return out;

    if (options_.method == SolverOptions::Method::direct) {
        if (symmetric_) {
            out = fact_->ldlt.solve(rhs);
        } else if (transposed) {
            out = fact_->lu.transpose().solve(rhs);
        } else {
            out = fact_->lu.solve(rhs);
        }
        return out;
    }

    for (Index k = 0; k < rhs.cols(); ++k) {
        const Eigen::VectorXd b = rhs.col(k);
        if (b.squaredNorm() == 0.0) {
            out.col(k).setZero();
            continue;
        }
        Eigen::ComputationInfo info;
        Index iters;
        double err;
        if (symmetric_) {
            out.col(k) = fact_->cg.solve(b);
            info = fact_->cg.info();
            iters = fact_->cg.iterations();
            err = fact_->cg.error();
        } else {
            auto& s = transposed ? fact_->bicg_t : fact_->bicg;
            out.col(k) = s.solve(b);
            info = s.info();
            iters = s.iterations();
            err = s.error();
        }
        if (info != Eigen::Success || !out.col(k).allFinite()) {
            std::ostringstream msg;
            msg << "iterative solve did not converge (column " << k << ", " << iters
                << " iterations, relative residual " << err << ")";
            throw SolverError(msg.str());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

std::vector<int> equispaced_columns(int nx, int count) {
    if (count < 1) throw std::invalid_argument("need at least one source/detector");
    if (count > nx - 2) throw std::invalid_argument("more sources/detectors than boundary nodes");
    std::vector<int> cols(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
        cols[k] = static_cast<int>(std::lround(static_cast<double>(k + 1) * (nx - 1) / (count + 1)));
    }
    return cols;
}

SourceDetectorLayout place_sources_detectors(const Grid2D& grid, int n_sources, int n_detectors) {
    SourceDetectorLayout layout;
    const double amp = 1.0 / (grid.hx() * grid.hy());

    layout.B.resize(grid.size(), n_sources);
    std::vector<Eigen::Triplet<double>> tb;
    for (int k = 0; int i : equispaced_columns(grid.nx(), n_sources)) {
        const Index n = grid.node(i, 0);
        layout.source_nodes.push_back(n);
        tb.emplace_back(n, k++, amp);
    }
    layout.B.setFromTriplets(tb.begin(), tb.end());

    layout.C.resize(grid.size(), n_detectors);
    std::vector<Eigen::Triplet<double>> tc;
    for (int k = 0; int i : equispaced_columns(grid.nx(), n_detectors)) {
        const Index n = grid.node(i, grid.ny() - 1);
        layout.detector_nodes.push_back(n);
        tc.emplace_back(n, k++, 1.0);
    }
    layout.C.setFromTriplets(tc.begin(), tc.end());
    return layout;
}

}  // namespace dotsketch
