#pragma once

// Finite-difference discretization of the zero-frequency diffusion model
//
//   -div(D grad phi) + mu phi = g      on (-a, a) x (0, c)
//   phi = 0                            on x = -a, x = a
//   0.25 phi + (D/2) dphi/dn = 0       on y = 0 (top), y = c (bottom)
//
// Robin rows are closed by ghost-node elimination and then halved so the
// assembled operator stays symmetric. Dirichlet unknowns are kept as identity
// rows with their couplings removed from neighbouring rows.

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace dotsketch {

using Index = Eigen::Index;
using SpMat = Eigen::SparseMatrix<double>;

enum class NodeTag : std::uint8_t { interior, dirichlet_side, robin_top, robin_bottom };

/// Rectangular tensor grid. Node (i, j) has x = -a + i*hx, y = j*hy; j = 0
/// is the top face and j = ny-1 the bottom face. Corners belong to the
/// Dirichlet sides.
class Grid2D {
public:
    Grid2D(int nx, int ny, double a, double c);

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    double hx() const { return hx_; }
    double hy() const { return hy_; }
    double a() const { return a_; }
    double c() const { return c_; }
    Index size() const { return static_cast<Index>(nx_) * ny_; }

    Index node(int i, int j) const { return static_cast<Index>(j) * nx_ + i; }
    std::pair<int, int> ij(Index n) const {
        return {static_cast<int>(n % nx_), static_cast<int>(n / nx_)};
    }
    double x(int i) const { return -a_ + i * hx_; }
    double y(int j) const { return j * hy_; }

    NodeTag tag(Index n) const;

    /// Scale applied to a node's equation after assembly: 1 in the interior,
    /// 1/2 on Robin faces, 0 on Dirichlet nodes. Equals d(A_nn)/d(mu_n).
    double row_weight(Index n) const;
    Eigen::VectorXd row_weights() const;

    /// Node coordinates as an n x 2 matrix.
    Eigen::MatrixX2d points() const;

private:
    int nx_;
    int ny_;
    double a_;
    double c_;
    double hx_;
    double hy_;
};

Grid2D build_grid(int nx, int ny, double a, double c);

class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SolverOptions {
    enum class Method { direct, iterative };
    Method method = Method::direct;
    /// Relative residual target for the iterative path.
    double lin_tol = 1e-8;
    int max_iterations = 5000;
};

/// Discretized operator together with its factorization. Symmetric matrices
/// use a sparse LDL^T, general ones a sparse LU; the iterative path uses
/// preconditioned CG (symmetric) or BiCGSTAB.
class SparseSystem {
public:
    explicit SparseSystem(SpMat A, SolverOptions options = {});
    ~SparseSystem();
    SparseSystem(SparseSystem&&) noexcept;
    SparseSystem& operator=(SparseSystem&&) noexcept;

    const SpMat& matrix() const { return A_; }
    Index size() const { return A_.rows(); }
    bool symmetric() const { return symmetric_; }
    const SolverOptions& options() const { return options_; }

    /// Solves A Z = rhs column by column.
    Eigen::MatrixXd solve_forward(const Eigen::MatrixXd& rhs) const;
    /// Solves A^T Y = rhs column by column.
    Eigen::MatrixXd solve_adjoint(const Eigen::MatrixXd& rhs) const;

private:
    struct Factorization;

    Eigen::MatrixXd solve_impl(const Eigen::MatrixXd& rhs, bool transposed) const;

    SpMat A_;
    SolverOptions options_;
    bool symmetric_ = false;
    std::unique_ptr<Factorization> fact_;
};

/// Diffusion-plus-absorption operator. D is per node (harmonic mean on
/// faces), mu per node on the diagonal.
SpMat assemble_matrix(const Grid2D& grid, std::span<const double> diffusion,
                      std::span<const double> absorption);

SparseSystem assemble_system(const Grid2D& grid, std::span<const double> diffusion,
                             std::span<const double> absorption, SolverOptions options = {});

/// Diffusion part only (mu = 0). A(mu) = K + diag(row_weights .* mu).
SpMat assemble_diffusion(const Grid2D& grid, std::span<const double> diffusion);

/// Right-hand side contributions of inhomogeneous Robin data
/// 0.25 phi + (D/2) dphi/dn = g on the top and bottom faces, one value per
/// column i. Used for manufactured-solution checks.
Eigen::VectorXd robin_load(const Grid2D& grid, std::span<const double> diffusion,
                           std::span<const double> top, std::span<const double> bottom);

/// Volumetric source g sampled at nodes, scaled consistently with the rows.
Eigen::VectorXd volume_load(const Grid2D& grid, std::span<const double> source);

struct SourceDetectorLayout {
    SpMat B;                          ///< n x n_s, one entry 1/(hx*hy) per column
    SpMat C;                          ///< n x n_d, one unit entry per column
    std::vector<Index> source_nodes;
    std::vector<Index> detector_nodes;

    Index n_sources() const { return B.cols(); }
    Index n_detectors() const { return C.cols(); }
};

/// Positions k = 0..count-1 at column round((k+1)(nx-1)/(count+1)), which
/// keeps every point off the Dirichlet corners.
std::vector<int> equispaced_columns(int nx, int count);

/// Sources on the top face, detectors on the bottom face.
SourceDetectorLayout place_sources_detectors(const Grid2D& grid, int n_sources, int n_detectors);

}  // namespace dotsketch
