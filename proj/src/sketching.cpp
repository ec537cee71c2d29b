#include "dotsketch/sketching.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "dotsketch/csv.hpp"

namespace dotsketch {

const char* to_string(ColumnOrigin origin) {
    switch (origin) {
        case ColumnOrigin::random: return "random";
        case ColumnOrigin::retained: return "retained";
        case ColumnOrigin::optimized: return "optimized";
    }
    return "unknown";
}

double SketchPair::estimator_scale() const {
    if (identity) return 1.0;
    return 1.0 / static_cast<double>(source_samples() * detector_samples());
}

int SketchPair::count(const std::vector<ColumnOrigin>& tags, ColumnOrigin which) const {
    int c = 0;
    for (auto t : tags) c += t == which ? 1 : 0;
    return c;
}

namespace {

void check_block(const Eigen::MatrixXd& M, const std::vector<ColumnOrigin>& tags, const char* name) {
    if (static_cast<Eigen::Index>(tags.size()) != M.cols()) {
        throw std::logic_error(std::string(name) + ": origin tags do not match column count");
    }
    if (M.cols() > M.rows()) throw std::logic_error(std::string(name) + ": more samples than physical terms");
    const double target = static_cast<double>(M.rows());
    for (Eigen::Index k = 0; k < M.cols(); ++k) {
        if (tags[k] == ColumnOrigin::random) {
            if (!(M.col(k).array().abs() == 1.0).all()) {
                throw std::logic_error(std::string(name) + ": random column with non +-1 entry");
            }
        } else if (std::abs(M.col(k).squaredNorm() - target) > 1e-9 * target) {
            throw std::logic_error(std::string(name) + ": column norm differs from sqrt(n)");
        }
    }
}

}  // namespace

void SketchPair::validate() const {
    if (identity) return;
    check_block(W, w_origin, "W");
    check_block(V, v_origin, "V");
}

SketchPair draw_sketch(Eigen::Index n_sources, Eigen::Index source_samples, Eigen::Index n_detectors,
                       Eigen::Index detector_samples, std::uint64_t seed) {
    if (source_samples < 1 || detector_samples < 1) throw std::invalid_argument("need at least one sample");
    if (source_samples > n_sources) throw std::invalid_argument("more source samples than sources");
    if (detector_samples > n_detectors) throw std::invalid_argument("more detector samples than detectors");

    std::mt19937_64 rng(seed);
    auto sign = [&rng] { return (rng() >> 63) ? 1.0 : -1.0; };

    SketchPair s;
    s.seed = seed;
    s.W.resize(n_sources, source_samples);
    s.V.resize(n_detectors, detector_samples);
    for (Eigen::Index j = 0; j < s.W.cols(); ++j)
        for (Eigen::Index i = 0; i < s.W.rows(); ++i) s.W(i, j) = sign();
    for (Eigen::Index j = 0; j < s.V.cols(); ++j)
        for (Eigen::Index i = 0; i < s.V.rows(); ++i) s.V(i, j) = sign();
    s.w_origin.assign(static_cast<std::size_t>(source_samples), ColumnOrigin::random);
    s.v_origin.assign(static_cast<std::size_t>(detector_samples), ColumnOrigin::random);
    return s;
}

SketchPair identity_sketch(Eigen::Index n_sources, Eigen::Index n_detectors) {
    SketchPair s;
    s.W = Eigen::MatrixXd::Identity(n_sources, n_sources);
    s.V = Eigen::MatrixXd::Identity(n_detectors, n_detectors);
    s.w_origin.assign(static_cast<std::size_t>(n_sources), ColumnOrigin::random);
    s.v_origin.assign(static_cast<std::size_t>(n_detectors), ColumnOrigin::random);
    s.identity = true;
    return s;
}

double frob_estimate(const Eigen::MatrixXd& sketched_residual) {
    if (sketched_residual.size() == 0) return 0.0;
    return sketched_residual.squaredNorm() /
           static_cast<double>(sketched_residual.rows() * sketched_residual.cols());
}

double frob_estimate(const SketchPair& sketch, const Eigen::MatrixXd& sketched_residual) {
    return sketch.estimator_scale() * sketched_residual.squaredNorm();
}

void write_sketch_csv(const SketchPair& sketch, const std::filesystem::path& dir) {
    write_matrix_csv(dir / "sketch_W.csv", sketch.W);
    write_matrix_csv(dir / "sketch_V.csv", sketch.V);
    std::ofstream tags(dir / "sketch_origin.csv");
    if (!tags) throw std::runtime_error("cannot write sketch origin tags in " + dir.string());
    tags << "matrix,column,origin\n";
    for (std::size_t k = 0; k < sketch.w_origin.size(); ++k)
        tags << "W," << k << ',' << to_string(sketch.w_origin[k]) << '\n';
    for (std::size_t k = 0; k < sketch.v_origin.size(); ++k)
        tags << "V," << k << ',' << to_string(sketch.v_origin[k]) << '\n';
}

}  // namespace dotsketch
