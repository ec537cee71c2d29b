#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "dotsketch/opt_directions.hpp"

using namespace dotsketch;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd kron(const MatrixXd& A, const MatrixXd& B) {
    MatrixXd K(A.rows() * B.rows(), A.cols() * B.cols());
    for (Index i = 0; i < A.rows(); ++i)
        for (Index j = 0; j < A.cols(); ++j) K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
    return K;
}

MatrixXd gaussian(Index r, Index c, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    MatrixXd M(r, c);
    for (Index k = 0; k < M.size(); ++k) M.data()[k] = n(rng);
    return M;
}

MatrixXd random_orthonormal(Index n, Index l, std::mt19937_64& rng) { return orthonormalize(gaussian(n, l, rng)); }

double direct_objective(const MatrixXd& W, const MatrixXd& V, const MatrixXd& J) {
    return (kron(W.transpose(), V.transpose()) * J).squaredNorm();
}

// Best single direction in span(B) (two columns) by a 1-degree sweep refined
// with golden-section search around the best grid angle.
template <typename F>
double angular_max(F f) {
    double best_t = 0.0, best = -1.0;
    for (int deg = 0; deg < 180; ++deg) {
        const double t = deg * M_PI / 180.0;
        const double v = f(t);
        if (v > best) best = v, best_t = t;
    }
    double a = best_t - M_PI / 180.0, b = best_t + M_PI / 180.0;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 100; ++it) {
        const double c = b - g * (b - a), d = a + g * (b - a);
        if (f(c) > f(d)) b = d;
        else a = c;
    }
    return std::max(best, f(0.5 * (a + b)));
}

}  // namespace

TEST(Contractions, StarSelectsAndMatchesKronecker) {
    std::mt19937_64 rng(1);
    const Index ns = 3, nd = 4, np = 2;
    const MatrixXd J = gaussian(ns * nd, np, rng);
    EXPECT_EQ(star(VectorXd::Unit(ns, 0), J, nd), J.topRows(nd));
    EXPECT_EQ(star(VectorXd::Zero(ns), J, nd).norm(), 0.0);
    const VectorXd w = gaussian(ns, 1, rng);
    const MatrixXd V = gaussian(nd, 2, rng);
    const MatrixXd lhs = V.transpose() * star(w, J, nd);
    const MatrixXd rhs = kron(w.transpose(), V.transpose()) * J;
    EXPECT_LE((lhs - rhs).norm(), 1e-12 * rhs.norm());
}

TEST(Contractions, CircledStarSelectsAndMatchesKronecker) {
    std::mt19937_64 rng(2);
    const Index ns = 3, nd = 4, np = 2;
    const MatrixXd J = gaussian(ns * nd, np, rng);
    const MatrixXd sel = circled_star(VectorXd::Unit(nd, 0), J, ns);
    for (Index j = 0; j < ns; ++j) EXPECT_EQ(sel.row(j), J.row(j * nd));
    EXPECT_EQ(circled_star(VectorXd::Zero(nd), J, ns).norm(), 0.0);
    const VectorXd v = gaussian(nd, 1, rng);
    const MatrixXd W = gaussian(ns, 2, rng);
    const MatrixXd lhs = W.transpose() * circled_star(v, J, ns);
    const MatrixXd rhs = kron(W.transpose(), v.transpose()) * J;
    EXPECT_LE((lhs - rhs).norm(), 1e-12 * rhs.norm());
}

TEST(Contractions, SketchedNormMatchesKronecker) {
    std::mt19937_64 rng(3);
    const MatrixXd J = gaussian(5 * 6, 4, rng);
    const MatrixXd W = gaussian(5, 3, rng);
    const MatrixXd V = gaussian(6, 2, rng);
    EXPECT_NEAR(sketched_jacobian_norm2(W, V, J), direct_objective(W, V, J), 1e-10 * direct_objective(W, V, J));
}

TEST(Complement, Properties) {
    std::mt19937_64 rng(4);
    const MatrixXd M = random_orthonormal(7, 3, rng);
    const MatrixXd Mc = complement_basis(M);
    EXPECT_EQ(Mc.cols(), 4);
    EXPECT_LE((M.transpose() * Mc).norm(), 1e-12);
    EXPECT_TRUE((Mc.transpose() * Mc).isIdentity(1e-12));
    EXPECT_EQ(complement_basis(MatrixXd::Identity(3, 3)).cols(), 0);
    const MatrixXd e2 = complement_basis(Eigen::Vector2d(1.0, 0.0));
    EXPECT_NEAR(std::abs(e2(1, 0)), 1.0, 1e-15);
    EXPECT_NEAR(e2(0, 0), 0.0, 1e-15);
    EXPECT_THROW(complement_basis(MatrixXd::Constant(3, 1, 2.0)), std::invalid_argument);
}

TEST(Remove, IdentityWhenNothingRemoved) {
    std::mt19937_64 rng(5);
    const MatrixXd J = gaussian(16, 3, rng);
    const MatrixXd W = random_orthonormal(4, 2, rng), V = random_orthonormal(4, 3, rng);
    const auto d = remove_detectors(W, V, J, 0);
    EXPECT_LE((d.basis * d.basis.transpose() - V * V.transpose()).norm(), 1e-12);
    EXPECT_NEAR(d.achieved, sketched_jacobian_norm2(W, V, J), 1e-10);
    const auto s = remove_sources(W, V, J, 0);
    EXPECT_LE((s.basis * s.basis.transpose() - W * W.transpose()).norm(), 1e-12);
}

TEST(Remove, AngularSweepOracle) {
    std::mt19937_64 rng(6);
    for (int rep = 0; rep < 5; ++rep) {
        const MatrixXd J = gaussian(9, 2, rng);
        const MatrixXd W = random_orthonormal(3, 2, rng), V = random_orthonormal(3, 2, rng);
        const auto d = remove_detectors(W, V, J, 1);
        const double best_d = angular_max([&](double t) {
            const VectorXd v = std::cos(t) * V.col(0) + std::sin(t) * V.col(1);
            return sketched_jacobian_norm2(W, v, J);
        });
        EXPECT_NEAR(d.achieved, best_d, 1e-6 * best_d);
        const auto s = remove_sources(W, V, J, 1);
        const double best_s = angular_max([&](double t) {
            const VectorXd w = std::cos(t) * W.col(0) + std::sin(t) * W.col(1);
            return sketched_jacobian_norm2(w, V, J);
        });
        EXPECT_NEAR(s.achieved, best_s, 1e-6 * best_s);
    }
}

TEST(Updates, CertificatesAndRandomDominance) {
    std::mt19937_64 rng(7);
    const Index ns = 6, nd = 6, l = 3, np = 5;
    for (int inst = 0; inst < 10; ++inst) {
        const MatrixXd J = gaussian(ns * nd, np, rng);
        const MatrixXd W = random_orthonormal(ns, l, rng), V = random_orthonormal(nd, l, rng);
        const auto rd = remove_detectors(W, V, J, 1);
        const auto rs = remove_sources(W, V, J, 1);
        const auto ad = add_detectors(W, V, J, 1);
        const auto as = add_sources(W, V, J, 1);
        for (const auto* u : {&rd, &rs, &ad, &as}) EXPECT_NEAR(u->achieved, u->predicted, 1e-8 * u->predicted);
        const MatrixXd Vc = complement_basis(V), Wc = complement_basis(W);
        for (int c = 0; c < 200; ++c) {
            const MatrixXd G = random_orthonormal(l, l - 1, rng);
            EXPECT_GE(rd.achieved, sketched_jacobian_norm2(W, V * G, J) - 1e-12);
            EXPECT_GE(rs.achieved, sketched_jacobian_norm2(W * G, V, J) - 1e-12);
            MatrixXd Va(nd, l + 1), Wa(ns, l + 1);
            Va << V, Vc * random_orthonormal(Vc.cols(), 1, rng);
            Wa << W, Wc * random_orthonormal(Wc.cols(), 1, rng);
            EXPECT_GE(ad.achieved, sketched_jacobian_norm2(W, Va, J) - 1e-12);
            EXPECT_GE(as.achieved, sketched_jacobian_norm2(Wa, V, J) - 1e-12);
        }
    }
}

TEST(Updates, AddNothingKeepsBasis) {
    std::mt19937_64 rng(8);
    const MatrixXd J = gaussian(16, 3, rng);
    const MatrixXd W = random_orthonormal(4, 2, rng), V = random_orthonormal(4, 2, rng);
    EXPECT_EQ(add_detectors(W, V, J, 0).basis, V);
    EXPECT_EQ(add_sources(W, V, J, 0).basis, W);
    EXPECT_THROW(add_detectors(W, V, J, 3), std::invalid_argument);
    EXPECT_THROW(remove_sources(W, V, J, 2), std::invalid_argument);
    EXPECT_THROW(remove_detectors(W * 2.0, V, J, 1), std::invalid_argument);
}

TEST(TwoPhase, ShapesTagsAndMonotoneAdds) {
    std::mt19937_64 rng(9);
    const Index ns = 8, nd = 7, np = 4;
    const MatrixXd J = gaussian(ns * nd, np, rng);
    const SketchPair sk = draw_sketch(ns, 4, nd, 3, 17);
    for (Index s = 1; s <= 2; ++s) {
        const ReplacementResult r = two_phase_replace(sk, J, s);
        EXPECT_EQ(r.sketch.W.rows(), ns);
        EXPECT_EQ(r.sketch.W.cols(), 4);
        EXPECT_EQ(r.sketch.V.rows(), nd);
        EXPECT_EQ(r.sketch.V.cols(), 3);
        EXPECT_EQ(r.sketch.count(r.sketch.w_origin, ColumnOrigin::optimized), s);
        EXPECT_EQ(r.sketch.count(r.sketch.v_origin, ColumnOrigin::optimized), s);
        EXPECT_NO_THROW(r.sketch.validate());
        ASSERT_EQ(r.steps.size(), static_cast<std::size_t>(4 * s));
        for (Index t = 0; t < s; ++t) {
            EXPECT_EQ(r.steps[2 * t].kind, "remove_source");
            EXPECT_EQ(r.steps[2 * t + 1].kind, "remove_detector");
        }
        double prev = r.steps[2 * s - 1].objective;
        for (std::size_t t = 2 * s; t < r.steps.size(); ++t) {
            EXPECT_GE(r.steps[t].objective, prev - 1e-12);
            prev = r.steps[t].objective;
        }
        // Final objective on orthonormal bases equals the last step's value.
        const double final_obj =
            sketched_jacobian_norm2(r.sketch.W / std::sqrt(double(ns)), r.sketch.V / std::sqrt(double(nd)), J);
        EXPECT_NEAR(final_obj, r.steps.back().objective, 1e-10 * final_obj);
    }
    EXPECT_THROW(two_phase_replace(sk, J, 3), std::invalid_argument);
    EXPECT_THROW(two_phase_replace(identity_sketch(ns, nd), J, 1), std::invalid_argument);
    EXPECT_EQ(two_phase_replace(sk, J, 0).sketch.W, sk.W);
}

TEST(TwoPhase, RemoveDetectorSvdSize) {
    std::mt19937_64 rng(10);
    const Index ns = 32, nd = 32, np = 100;
    const MatrixXd J = gaussian(ns * nd, np, rng);
    const SketchPair sk = draw_sketch(ns, 10, nd, 10, 3);
    const auto d = remove_detectors(orthonormalize(sk.W), orthonormalize(sk.V), J, 1);
    EXPECT_EQ(d.svd_rows, 10);
    EXPECT_EQ(d.svd_cols, 1000);
}
