#pragma once

// Frobenius-optimal replacement of simultaneous source/detector directions.
//
// For a full Jacobian J ((n_s n_d) x n_p, source-major rows) the sketched
// Jacobian (W^T kron V^T) J can be rewritten without the Kronecker factor:
//
//   ||(W^T kron V^T) J||_F^2 = ||V^T [w_1*J ... w_ls*J]||_F^2
//                            = ||W^T [v_1(*)J ... v_ld(*)J]||_F^2
//
// where w*J (n_d x n_p) sums the per-source blocks with weights w and
// v(*)J (n_s x n_p) contracts every per-source block with v. Keeping or
// adding the leading left singular vectors of these wide matrices maximizes
// the sketched Jacobian norm over orthonormal bases.

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dotsketch/sketching.hpp"

namespace dotsketch {

/// Column k = sum_j w_j J_{j,k}; result n_d x n_p.
Eigen::MatrixXd star(const Eigen::VectorXd& w, const Eigen::MatrixXd& J, Eigen::Index n_detectors);

/// Entry (j, k) = v^T J_{j,k}; result n_s x n_p.
Eigen::MatrixXd circled_star(const Eigen::VectorXd& v, const Eigen::MatrixXd& J, Eigen::Index n_sources);

/// [w_1*J ... w_l*J], n_d x (l n_p).
Eigen::MatrixXd source_contracted_blocks(const Eigen::MatrixXd& W, const Eigen::MatrixXd& J,
                                         Eigen::Index n_detectors);

/// [v_1(*)J ... v_l(*)J], n_s x (l n_p).
Eigen::MatrixXd detector_contracted_blocks(const Eigen::MatrixXd& V, const Eigen::MatrixXd& J,
                                           Eigen::Index n_sources);

/// ||(W^T kron V^T) J||_F^2 evaluated through the contracted blocks.
double sketched_jacobian_norm2(const Eigen::MatrixXd& W, const Eigen::MatrixXd& V, const Eigen::MatrixXd& J);

/// Orthonormal basis with the same column count whose span contains range(M).
Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& M);

/// M_c with [M M_c] orthogonal; M must have orthonormal columns.
Eigen::MatrixXd complement_basis(const Eigen::MatrixXd& M);

struct DirectionUpdate {
    Eigen::MatrixXd basis;             ///< updated W or V, orthonormal columns
    Eigen::MatrixXd gamma;             ///< coefficients of the kept/added directions
    Eigen::VectorXd singular_values;   ///< of the matrix that was decomposed
    double predicted = 0.0;            ///< objective implied by the singular values
    double achieved = 0.0;             ///< ||(W^T kron V^T) J||_F^2 after the update
    Eigen::Index svd_rows = 0;
    Eigen::Index svd_cols = 0;
};

// W and V must have orthonormal columns for all four updates.
DirectionUpdate remove_detectors(const Eigen::MatrixXd& W, const Eigen::MatrixXd& V, const Eigen::MatrixXd& J,
                                 Eigen::Index s);
DirectionUpdate remove_sources(const Eigen::MatrixXd& W, const Eigen::MatrixXd& V, const Eigen::MatrixXd& J,
                               Eigen::Index s);
DirectionUpdate add_detectors(const Eigen::MatrixXd& W, const Eigen::MatrixXd& V, const Eigen::MatrixXd& J,
                              Eigen::Index s);
DirectionUpdate add_sources(const Eigen::MatrixXd& W, const Eigen::MatrixXd& V, const Eigen::MatrixXd& J,
                            Eigen::Index s);

struct ReplacementStep {
    std::string kind;  ///< remove_source, remove_detector, add_source, add_detector
    Eigen::Index svd_rows = 0;
    Eigen::Index svd_cols = 0;
    double objective = 0.0;  ///< sketched Jacobian norm^2 (orthonormal bases) after the step
};

struct ReplacementResult {
    SketchPair sketch;
    std::vector<ReplacementStep> steps;
    double initial_objective = 0.0;
};

/// Phase 1 alternately removes one source then one detector direction, s
/// times; phase 2 alternately adds one optimized source then one detector, s
/// times. Bases are orthonormalized first and rescaled to column norm
/// sqrt(n) at the end.
ReplacementResult two_phase_replace(const SketchPair& sketch, const Eigen::MatrixXd& J, Eigen::Index s);

}  // namespace dotsketch
