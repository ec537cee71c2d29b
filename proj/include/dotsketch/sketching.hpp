#pragma once

// Simultaneous random sources/detectors and the sketched Frobenius-norm
// estimator  ||R||_F^2 ~ ||V^T R W||_F^2 / (l_s l_d)  for Rademacher W, V.

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

namespace dotsketch {

/// random: Rademacher column. retained: rotation inside the span of the
/// original random columns, rescaled to norm sqrt(n). optimized: SVD-chosen
/// direction, norm sqrt(n).
enum class ColumnOrigin : std::uint8_t { random, retained, optimized };

const char* to_string(ColumnOrigin origin);

struct SketchPair {
    Eigen::MatrixXd W;  ///< n_s x l_s
    Eigen::MatrixXd V;  ///< n_d x l_d
    std::uint64_t seed = 0;
    std::vector<ColumnOrigin> w_origin;
    std::vector<ColumnOrigin> v_origin;
    /// W = I, V = I with the raw (unscaled) Frobenius norm; used for the
    /// all-sources/all-detectors path.
    bool identity = false;

    Eigen::Index n_sources() const { return W.rows(); }
    Eigen::Index n_detectors() const { return V.rows(); }
    Eigen::Index source_samples() const { return W.cols(); }
    Eigen::Index detector_samples() const { return V.cols(); }

    /// 1/(l_s l_d), or 1 in identity mode.
    double estimator_scale() const;

    /// Checks shapes, the +-1 property of random columns and the sqrt(n)
    /// column norm of the others.
    void validate() const;

    int count(const std::vector<ColumnOrigin>& tags, ColumnOrigin which) const;
};

SketchPair draw_sketch(Eigen::Index n_sources, Eigen::Index source_samples, Eigen::Index n_detectors,
                       Eigen::Index detector_samples, std::uint64_t seed);

SketchPair identity_sketch(Eigen::Index n_sources, Eigen::Index n_detectors);

/// ||R_s||_F^2 / (l_s l_d) where R_s = V^T R W is l_d x l_s.
double frob_estimate(const Eigen::MatrixXd& sketched_residual);

/// Same, honouring identity passthrough.
double frob_estimate(const SketchPair& sketch, const Eigen::MatrixXd& sketched_residual);

void write_sketch_csv(const SketchPair& sketch, const std::filesystem::path& dir);

}  // namespace dotsketch
