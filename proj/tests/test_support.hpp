#pragma once

#include <random>

#include <Eigen/Dense>

#include "dotsketch/objective.hpp"

namespace dotsketch::testing {

inline PalsModel small_pals(int bases = 2) {
    PalsModel m;
    m.basis_count = bases;
    m.epsilon = 0.05;
    return m;
}

inline DotModel small_model(int n = 21, int ns = 4, int nd = 4, int bases = 2) {
    Grid2D grid = build_grid(n, n, 1.0, 1.0);
    SourceDetectorLayout layout = place_sources_detectors(grid, ns, nd);
    Eigen::VectorXd diffusion = Eigen::VectorXd::Constant(grid.size(), 1.0 / 30.0);
    return DotModel(std::move(grid), std::move(layout), std::move(diffusion), small_pals(bases));
}

/// Bases with centers inside the domain and moderate weights.
inline ParamVector random_params(int bases, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ParamVector p(Eigen::VectorXd::Zero(4 * bases));
    for (int j = 0; j < bases; ++j) {
        p.set_basis(j, 0.3 + 0.5 * u(rng), 1.5 + 2.0 * u(rng), {-0.6 + 1.2 * u(rng), 0.2 + 0.6 * u(rng)});
    }
    return p;
}

inline Eigen::MatrixXd dense_inverse_measurements(const DotModel& model, const Eigen::VectorXd& mu) {
    const SparseSystem sys = model.system_for_absorption(mu);
    const Eigen::MatrixXd A(sys.matrix());
    const Eigen::MatrixXd B(model.layout().B);
    const Eigen::MatrixXd C(model.layout().C);
    return C.transpose() * A.fullPivLu().solve(B);
}

}  // namespace dotsketch::testing
