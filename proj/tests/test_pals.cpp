#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "dotsketch/pals.hpp"

using namespace dotsketch;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

PalsModel model_with(int bases) {
    PalsModel m;
    m.basis_count = bases;
    m.epsilon = 0.05;
    return m;
}

ParamVector random_params(int bases, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ParamVector p(VectorXd::Zero(4 * bases));
    for (int j = 0; j < bases; ++j) {
        p.set_basis(j, -0.5 + 1.2 * u(rng), 1.0 + 3.0 * u(rng), {-0.5 + u(rng), 0.2 + 0.6 * u(rng)});
    }
    return p;
}

PointList random_points(int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    PointList pts(n, 2);
    for (int i = 0; i < n; ++i) pts.row(i) << -1.0 + 2.0 * u(rng), u(rng);
    return pts;
}

}  // namespace

TEST(Wendland, ClosedForm) {
    EXPECT_DOUBLE_EQ(wendland_c2(0.0), 1.0);
    EXPECT_DOUBLE_EQ(wendland_c2_derivative(0.0), 0.0);
    EXPECT_DOUBLE_EQ(wendland_c2(1.0), 0.0);
    EXPECT_DOUBLE_EQ(wendland_c2(2.0), 0.0);
    EXPECT_NEAR(wendland_c2(0.5), 0.1875, 1e-15);
    EXPECT_NEAR(wendland_c2_derivative(0.5), -1.25, 1e-15);
    EXPECT_THROW(wendland_c2(-0.1), std::invalid_argument);
}

TEST(Heaviside, ClosedForm) {
    EXPECT_DOUBLE_EQ(heaviside(0.0, 0.1), 0.5);
    EXPECT_NEAR(heaviside(0.1, 0.1), 0.75, 1e-15);
    EXPECT_NEAR(heaviside(1e12, 0.1), 1.0, 1e-12);
    EXPECT_NEAR(heaviside(-1e12, 0.1), 0.0, 1e-12);
    EXPECT_NEAR(heaviside_derivative(0.0, 0.1), 1.0 / (M_PI * 0.1), 1e-12);
}

TEST(Pals, Evaluation) {
    PalsModel m = model_with(1);
    m.gamma = 0.1;
    ParamVector p(VectorXd::Zero(4));
    PointList pts(2, 2);
    pts << 0.3, 0.5,  // distance 0.3 from the center
        0.0, 0.5;     // at the center
    EXPECT_EQ(pals_eval(m, p, pts).norm(), 0.0);
    p.set_basis(0, 1.0, 2.0, {0.0, 0.5});
    const VectorXd phi = pals_eval(m, p, pts);
    EXPECT_NEAR(phi(0), wendland_c2(std::sqrt(0.37)), 1e-15);
    // (1 - 0.608276)^4 (4 * 0.608276 + 1) by hand
    EXPECT_NEAR(phi(0), 0.0808363, 1e-6);
    EXPECT_NEAR(phi(1), wendland_c2(0.1), 1e-15);
}

TEST(Pals, AbsorptionMap) {
    PalsModel m = model_with(1);
    ParamVector p(VectorXd::Zero(4));
    p.set_basis(0, m.tau / wendland_c2(m.gamma), 1.0, {0.0, 0.5});
    PointList pts(1, 2);
    pts << 0.0, 0.5;
    EXPECT_NEAR(mu_from_pals(m, p, pts)(0), 0.5 * (m.mu_in + m.mu_out), 1e-12);
    // H = 0.75 gives 0.01 + 0.19 * 0.75.
    EXPECT_NEAR(m.mu_out + (m.mu_in - m.mu_out) * 0.75, 0.1525, 1e-15);
    p.set_basis(0, 1e9, 1.0, {0.0, 0.5});
    EXPECT_NEAR(mu_from_pals(m, p, pts)(0), m.mu_in, 1e-9);
}

TEST(Pals, RangeStaysBetweenBackgroundAndAnomaly) {
    std::mt19937_64 rng(3);
    const PalsModel m = model_with(6);
    const VectorXd mu = mu_from_pals(m, random_params(6, rng), random_points(500, rng));
    EXPECT_GT(mu.minCoeff(), m.mu_out);
    EXPECT_LT(mu.maxCoeff(), m.mu_in);
}

TEST(Pals, FarBasisChangesNothing) {
    std::mt19937_64 rng(5);
    const PalsModel m2 = model_with(2);
    const PalsModel m3 = model_with(3);
    ParamVector p2 = random_params(2, rng);
    ParamVector p3(VectorXd::Zero(12));
    p3.values().head(8) = p2.values();
    p3.set_basis(2, 0.7, 2.0, {50.0, 50.0});
    const PointList pts = random_points(200, rng);
    EXPECT_EQ((mu_from_pals(m2, p2, pts) - mu_from_pals(m3, p3, pts)).norm(), 0.0);
}

TEST(Pals, SensitivityRowsOutsideSupportAreZero) {
    const PalsModel m = model_with(1);
    ParamVector p(VectorXd::Zero(4));
    p.set_basis(0, 0.5, 4.0, {0.0, 0.5});
    PointList pts(2, 2);
    pts << 0.9, 0.5, 0.0, 0.5;
    const MatrixXd S = dmu_dp(m, p, pts);
    EXPECT_EQ(S.row(0).norm(), 0.0);
    const double phi = 0.5 * wendland_c2(m.gamma);
    const double expected = (m.mu_in - m.mu_out) * heaviside_derivative(phi - m.tau, m.epsilon) * wendland_c2(m.gamma);
    EXPECT_NEAR(S(1, ParamVector::alpha_index(0)), expected, 1e-12 * std::abs(expected));
}

TEST(Pals, SensitivityMatchesCentralDifferences) {
    std::mt19937_64 rng(11);
    const int bases = 4;
    const PalsModel m = model_with(bases);
    for (int draw = 0; draw < 10; ++draw) {
        const ParamVector p = random_params(bases, rng);
        const PointList pts = random_points(300, rng);
        const MatrixXd S = dmu_dp(m, p, pts);
        const MatrixXd Ss(dmu_dp_sparse(m, p, pts));
        EXPECT_LE((S - Ss).norm(), 1e-14 * (1.0 + S.norm()));
        for (Eigen::Index k = 0; k < p.size(); ++k) {
            const double h = 1e-6 * std::max(1.0, std::abs(p.values()(k)));
            ParamVector pp = p, pm = p;
            pp.values()(k) += h;
            pm.values()(k) -= h;
            const VectorXd fd = (mu_from_pals(m, pp, pts) - mu_from_pals(m, pm, pts)) / (2 * h);
            for (Eigen::Index i = 0; i < fd.size(); ++i) {
                if (std::abs(S(i, k)) > 1e-12) {
                    EXPECT_LE(std::abs(S(i, k) - fd(i)), 1e-5 * std::abs(S(i, k)) + 1e-10)
                        << "draw " << draw << " point " << i << " param " << k;
                }
            }
        }
    }
}

TEST(Pals, ParamLayout) {
    PalsModel m;
    EXPECT_EQ(m.param_count(), 100);
    ParamVector p(VectorXd::Zero(8));
    p.set_basis(1, 0.3, 2.0, {0.1, 0.6});
    EXPECT_DOUBLE_EQ(p.values()(4), 0.3);
    EXPECT_DOUBLE_EQ(p.values()(5), 2.0);
    EXPECT_DOUBLE_EQ(p.values()(6), 0.1);
    EXPECT_DOUBLE_EQ(p.values()(7), 0.6);
    EXPECT_EQ(p.basis_count(), 2);
}
