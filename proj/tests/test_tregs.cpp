#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "dotsketch/tregs.hpp"

using namespace dotsketch;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct Linear final : LeastSquaresProblem {
    MatrixXd J;
    VectorXd p_star;
    VectorXd residual(const VectorXd& p) override { return J * (p - p_star); }
    MatrixXd jacobian(const VectorXd&) override { return J; }
};

struct Rosenbrock final : LeastSquaresProblem {
    VectorXd residual(const VectorXd& p) override {
        return Eigen::Vector2d(10.0 * (p(1) - p(0) * p(0)), 1.0 - p(0));
    }
    MatrixXd jacobian(const VectorXd& p) override {
        MatrixXd J(2, 2);
        J << -20.0 * p(0), 10.0, -1.0, 0.0;
        return J;
    }
};

}  // namespace

TEST(GnStep, LinearProblemOneIteration) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 1.0);
    Linear prob;
    prob.J = MatrixXd::Identity(8, 4) * 2.0;
    for (int i = 0; i < 4; ++i) prob.J(4 + i, i) = 1.0 + 0.1 * i;
    prob.p_star = VectorXd::LinSpaced(4, -1.0, 2.0);
    const VectorXd p0 = VectorXd::Zero(4);
    const GnStep g = gn_step(prob.J, prob.residual(p0), 1e6);
    EXPECT_LE((g.step - (prob.p_star - p0)).norm(), 1e-12);

    TrOptions opt;
    opt.initial_radius = 1e6;
    opt.tolerance = 1e-20;
    TrState st = make_tr_state(p0, opt);
    EXPECT_EQ(tr_loop(prob, st, opt), TrStatus::converged);
    EXPECT_EQ(st.iterations, 1);
    EXPECT_LE((st.p - prob.p_star).norm(), 1e-12);
}

TEST(GnStep, GcvDropsTinySingularValue) {
    MatrixXd J = MatrixXd::Zero(3, 2);
    J(0, 0) = 1.0;
    J(1, 1) = 1e-8;
    const VectorXd r = Eigen::Vector3d(1.0, 1e-3, 1e-3);
    // k=1: 3 * 2e-6 / 4; k=2: 3 * 1e-6 / 1.
    EXPECT_NEAR(gcv_score(3, 1, 2e-6), 1.5e-6, 1e-20);
    EXPECT_NEAR(gcv_score(3, 2, 1e-6), 3e-6, 1e-20);
    const GnStep g = gn_step(J, r, 1e12);
    EXPECT_EQ(g.gcv_truncation, 1);
    EXPECT_EQ(g.truncation, 1);
    EXPECT_NEAR(g.step(0), -1.0, 1e-14);
    EXPECT_EQ(g.step(1), 0.0);
}

TEST(GnStep, WeightedGcv) {
    EXPECT_DOUBLE_EQ(gcv_score(10, 4, 1.0, 0.5), 10.0 / 64.0);
    EXPECT_DOUBLE_EQ(gcv_score(10, 10, 1.0), 0.0);
    EXPECT_THROW(gcv_score(10, 11, 1.0), std::invalid_argument);
    EXPECT_THROW(gcv_score(10, 2, 1.0, 0.0), std::invalid_argument);
}

TEST(GnStep, BoundaryScaling) {
    const MatrixXd J = MatrixXd::Identity(1, 1);
    const VectorXd r = VectorXd::Constant(1, -1.0);
    for (auto rule : {StepRule::truncate, StepRule::filter}) {
        const GnStep g = gn_step(J, r, 0.1, rule);
        EXPECT_NEAR(g.step.norm(), 0.1, 1e-12);
        EXPECT_TRUE(g.radius_limited);
        EXPECT_GT(g.predicted_reduction, 0.0);
    }
}

TEST(GnStep, StepNeverExceedsRadius) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        MatrixXd J(30, 8);
        for (int k = 0; k < J.size(); ++k) J.data()[k] = n(rng) * std::pow(10.0, -(k % 8) * 0.7);
        VectorXd r(30);
        for (int k = 0; k < 30; ++k) r(k) = n(rng);
        for (auto rule : {StepRule::truncate, StepRule::filter}) {
            for (double radius : {1e-3, 0.1, 10.0, 1e4}) {
                const GnStep g = gn_step(J, r, radius, rule);
                EXPECT_LE(g.step.norm(), radius * (1 + 1e-10));
                EXPECT_GT(g.predicted_reduction, 0.0);
            }
        }
    }
}

TEST(GnStep, NullStepOnZeroJacobian) {
    EXPECT_TRUE(gn_step(MatrixXd::Zero(3, 2), VectorXd::Ones(3), 1.0).null_step);
    EXPECT_TRUE(gn_step(MatrixXd::Ones(3, 2), VectorXd::Zero(3), 1.0).null_step);
    EXPECT_THROW(gn_step(MatrixXd::Ones(3, 2), VectorXd::Ones(2), 1.0), std::invalid_argument);
}

TEST(TrustRegion, RosenbrockWithinSixtyIterations) {
    for (auto rule : {StepRule::truncate, StepRule::filter}) {
        Rosenbrock prob;
        TrOptions opt;
        opt.tolerance = 1e-10;
        opt.max_iterations = 60;
        opt.step_rule = rule;
        TrState st = make_tr_state(Eigen::Vector2d(-1.2, 1.0), opt);
        EXPECT_EQ(tr_loop(prob, st, opt), TrStatus::converged) << to_string(rule);
        EXPECT_LT(st.misfit(), 1e-10);
        EXPECT_LE(st.iterations, 60);
        // Accepted iterates strictly decrease the misfit.
        double prev = st.history.front().misfit;
        for (std::size_t k = 1; k < st.history.size(); ++k) {
            if (st.history[k].accepted) {
                EXPECT_LT(st.history[k].misfit, prev);
                prev = st.history[k].misfit;
            }
        }
    }
}

TEST(TrustRegion, ReturnsImmediatelyWhenTolerated) {
    Rosenbrock prob;
    TrOptions opt;
    opt.tolerance = 1.0;
    TrState st = make_tr_state(Eigen::Vector2d(1.0, 1.0), opt);
    EXPECT_EQ(tr_loop(prob, st, opt), TrStatus::converged);
    EXPECT_EQ(st.iterations, 0);
    EXPECT_EQ(st.history.size(), 1u);
}

TEST(TrustRegion, NonFiniteTrialIsRejected) {
    struct Blowup final : LeastSquaresProblem {
        VectorXd residual(const VectorXd& p) override {
            if (p(0) > 0.5) return VectorXd::Constant(1, std::nan(""));
            return VectorXd::Constant(1, p(0) - 1.0);
        }
        MatrixXd jacobian(const VectorXd&) override { return MatrixXd::Identity(1, 1); }
    } prob;
    TrOptions opt;
    TrState st = make_tr_state(VectorXd::Zero(1), opt);
    EXPECT_EQ(tr_iterate(prob, st, opt), TrStatus::running);
    EXPECT_FALSE(st.history.back().accepted);
    EXPECT_DOUBLE_EQ(st.radius, 0.25);
    EXPECT_EQ(st.p(0), 0.0);
}

TEST(TrustRegion, StopCallbackAndBudget) {
    Rosenbrock prob;
    TrOptions opt;
    opt.max_iterations = 3;
    TrState st = make_tr_state(Eigen::Vector2d(-1.2, 1.0), opt);
    EXPECT_EQ(tr_loop(prob, st, opt), TrStatus::max_iterations);
    EXPECT_EQ(st.iterations, 3);
    TrState st2 = make_tr_state(Eigen::Vector2d(-1.2, 1.0), opt);
    EXPECT_EQ(tr_loop(prob, st2, opt, [](const TrState&) { return true; }), TrStatus::stopped);
    EXPECT_EQ(st2.iterations, 0);
}
