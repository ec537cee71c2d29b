#include "dotsketch/opt_directions.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/QR>
#include <Eigen/SVD>

namespace dotsketch {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Index source_count(const MatrixXd& J, Index n_detectors) {
    if (n_detectors < 1 || J.rows() % n_detectors != 0) {
        throw std::invalid_argument("Jacobian rows are not a multiple of the detector count");
    }
    return J.rows() / n_detectors;
}

void require_orthonormal(const MatrixXd& M, const char* name) {
    const MatrixXd G = M.transpose() * M;
    if (!G.isIdentity(1e-9)) throw std::invalid_argument(std::string(name) + " must have orthonormal columns");
}

void check_shapes(const MatrixXd& W, const MatrixXd& V, const MatrixXd& J) {
    if (J.rows() != W.rows() * V.rows()) throw std::invalid_argument("Jacobian does not match n_s * n_d rows");
    require_orthonormal(W, "W");
    require_orthonormal(V, "V");
}

struct LeftSvd {
    MatrixXd U;  // full left factor
    VectorXd sigma;
};

LeftSvd left_svd(const MatrixXd& X) {
    Eigen::JacobiSVD<MatrixXd, Eigen::ColPivHouseholderQRPreconditioner> svd(X, Eigen::ComputeFullU);
    return {svd.matrixU(), svd.singularValues()};
}

double top_energy(const VectorXd& sigma, Index k) {
    double e = 0.0;
    for (Index i = 0; i < std::min(k, sigma.size()); ++i) e += sigma(i) * sigma(i);
    return e;
}

}  // namespace

MatrixXd star(const VectorXd& w, const MatrixXd& J, Index n_detectors) {
    const Index ns = source_count(J, n_detectors);
    if (w.size() != ns) throw std::invalid_argument("star: weight length must equal n_s");
    MatrixXd out = MatrixXd::Zero(n_detectors, J.cols());
    for (Index j = 0; j < ns; ++j) {
        if (w(j) != 0.0) out.noalias() += w(j) * J.middleRows(j * n_detectors, n_detectors);
    }
    return out;
}

MatrixXd circled_star(const VectorXd& v, const MatrixXd& J, Index n_sources) {
    if (n_sources < 1 || J.rows() % n_sources != 0) {
        throw std::invalid_argument("circled_star: Jacobian rows are not a multiple of n_s");
    }
    const Index nd = J.rows() / n_sources;
    if (v.size() != nd) throw std::invalid_argument("circled_star: weight length must equal n_d");
    MatrixXd out(n_sources, J.cols());
    for (Index j = 0; j < n_sources; ++j) {
        out.row(j).noalias() = v.transpose() * J.middleRows(j * nd, nd);
    }
    return out;
}

MatrixXd source_contracted_blocks(const MatrixXd& W, const MatrixXd& J, Index n_detectors) {
    const Index np = J.cols();
    MatrixXd out(n_detectors, W.cols() * np);
    for (Index i = 0; i < W.cols(); ++i) out.middleCols(i * np, np) = star(W.col(i), J, n_detectors);
    return out;
}

MatrixXd detector_contracted_blocks(const MatrixXd& V, const MatrixXd& J, Index n_sources) {
    const Index np = J.cols();
    MatrixXd out(n_sources, V.cols() * np);
    for (Index q = 0; q < V.cols(); ++q) out.middleCols(q * np, np) = circled_star(V.col(q), J, n_sources);
    return out;
}

double sketched_jacobian_norm2(const MatrixXd& W, const MatrixXd& V, const MatrixXd& J) {
    if (J.rows() != W.rows() * V.rows()) throw std::invalid_argument("Jacobian does not match n_s * n_d rows");
    return (V.transpose() * source_contracted_blocks(W, J, V.rows())).squaredNorm();
}

MatrixXd orthonormalize(const MatrixXd& M) {
    Eigen::HouseholderQR<MatrixXd> qr(M);
    MatrixXd Q = qr.householderQ() * MatrixXd::Identity(M.rows(), M.cols());
    // Fix signs so each basis vector points along its source column.
    for (Index k = 0; k < Q.cols(); ++k) {
        if (Q.col(k).dot(M.col(k)) < 0.0) Q.col(k) *= -1.0;
    }
    return Q;
}

MatrixXd complement_basis(const MatrixXd& M) {
    require_orthonormal(M, "complement_basis input");
    const Index n = M.rows();
    const Index l = M.cols();
    if (l == n) return MatrixXd(n, 0);
    Eigen::HouseholderQR<MatrixXd> qr(M);
    const MatrixXd Q = qr.householderQ();
    return Q.rightCols(n - l);
}

DirectionUpdate remove_detectors(const MatrixXd& W, const MatrixXd& V, const MatrixXd& J, Index s) {
    check_shapes(W, V, J);
    if (s < 0 || s >= V.cols()) throw std::invalid_argument("remove_detectors: need 0 <= s < l_d");
    const MatrixXd X = V.transpose() * source_contracted_blocks(W, J, V.rows());
    const LeftSvd f = left_svd(X);
    DirectionUpdate u;
    const Index keep = V.cols() - s;
    u.gamma = f.U.leftCols(keep);
    u.basis = V * u.gamma;
    u.singular_values = f.sigma;
    u.predicted = top_energy(f.sigma, keep);
    u.achieved = sketched_jacobian_norm2(W, u.basis, J);
    u.svd_rows = X.rows();
    u.svd_cols = X.cols();
    return u;
}

DirectionUpdate remove_sources(const MatrixXd& W, const MatrixXd& V, const MatrixXd& J, Index s) {
    check_shapes(W, V, J);
    if (s < 0 || s >= W.cols()) throw std::invalid_argument("remove_sources: need 0 <= s < l_s");
    const MatrixXd X = W.transpose() * detector_contracted_blocks(V, J, W.rows());
    const LeftSvd f = left_svd(X);
    DirectionUpdate u;
    const Index keep = W.cols() - s;
    u.gamma = f.U.leftCols(keep);
    u.basis = W * u.gamma;
    u.singular_values = f.sigma;
    u.predicted = top_energy(f.sigma, keep);
    u.achieved = sketched_jacobian_norm2(u.basis, V, J);
    u.svd_rows = X.rows();
    u.svd_cols = X.cols();
    return u;
}

DirectionUpdate add_detectors(const MatrixXd& W, const MatrixXd& V, const MatrixXd& J, Index s) {
    check_shapes(W, V, J);
    if (s < 0 || s > V.rows() - V.cols()) throw std::invalid_argument("add_detectors: s exceeds n_d - l_d");
    const MatrixXd Vc = complement_basis(V);
    const MatrixXd X = Vc.transpose() * source_contracted_blocks(W, J, V.rows());
    DirectionUpdate u;
    u.svd_rows = X.rows();
    u.svd_cols = X.cols();
    u.basis.resize(V.rows(), V.cols() + s);
    u.basis.leftCols(V.cols()) = V;
    if (s > 0) {
        const LeftSvd f = left_svd(X);
        u.gamma = f.U.leftCols(s);
        u.basis.rightCols(s) = Vc * u.gamma;
        u.singular_values = f.sigma;
        u.predicted = sketched_jacobian_norm2(W, V, J) + top_energy(f.sigma, s);
    } else {
        u.gamma.resize(Vc.cols(), 0);
        u.predicted = sketched_jacobian_norm2(W, V, J);
    }
    u.achieved = sketched_jacobian_norm2(W, u.basis, J);
    return u;
}

DirectionUpdate add_sources(const MatrixXd& W, const MatrixXd& V, const MatrixXd& J, Index s) {
    check_shapes(W, V, J);
    if (s < 0 || s > W.rows() - W.cols()) throw std::invalid_argument("add_sources: s exceeds n_s - l_s");
    const MatrixXd Wc = complement_basis(W);
    const MatrixXd X = Wc.transpose() * detector_contracted_blocks(V, J, W.rows());
    DirectionUpdate u;
    u.svd_rows = X.rows();
    u.svd_cols = X.cols();
    u.basis.resize(W.rows(), W.cols() + s);
    u.basis.leftCols(W.cols()) = W;
    if (s > 0) {
        const LeftSvd f = left_svd(X);
        u.gamma = f.U.leftCols(s);
        u.basis.rightCols(s) = Wc * u.gamma;
        u.singular_values = f.sigma;
        u.predicted = sketched_jacobian_norm2(W, V, J) + top_energy(f.sigma, s);
    } else {
        u.gamma.resize(Wc.cols(), 0);
        u.predicted = sketched_jacobian_norm2(W, V, J);
    }
    u.achieved = sketched_jacobian_norm2(u.basis, V, J);
    return u;
}

ReplacementResult two_phase_replace(const SketchPair& sketch, const MatrixXd& J, Index s) {
    if (sketch.identity) throw std::invalid_argument("two_phase_replace: identity sketch has nothing to replace");
    const Index ls = sketch.source_samples();
    const Index ld = sketch.detector_samples();
    if (s < 0 || s >= std::min(ls, ld)) throw std::invalid_argument("two_phase_replace: need 0 <= s < min(l_s, l_d)");
    const Index ns = sketch.n_sources();
    const Index nd = sketch.n_detectors();
    if (J.rows() != ns * nd) throw std::invalid_argument("two_phase_replace: Jacobian does not match sketch");

    ReplacementResult out;
    out.sketch = sketch;
    if (s == 0) return out;

    MatrixXd W = orthonormalize(sketch.W);
    MatrixXd V = orthonormalize(sketch.V);
    out.initial_objective = sketched_jacobian_norm2(W, V, J);

    auto record = [&out](const char* kind, const DirectionUpdate& u) {
        out.steps.push_back({kind, u.svd_rows, u.svd_cols, u.achieved});
    };

    for (Index t = 0; t < s; ++t) {
        DirectionUpdate us = remove_sources(W, V, J, 1);
        W = us.basis;
        record("remove_source", us);
        DirectionUpdate ud = remove_detectors(W, V, J, 1);
        V = ud.basis;
        record("remove_detector", ud);
    }
    for (Index t = 0; t < s; ++t) {
        DirectionUpdate us = add_sources(W, V, J, 1);
        W = us.basis;
        record("add_source", us);
        DirectionUpdate ud = add_detectors(W, V, J, 1);
        V = ud.basis;
        record("add_detector", ud);
    }

    out.sketch.W = std::sqrt(static_cast<double>(ns)) * W;
    out.sketch.V = std::sqrt(static_cast<double>(nd)) * V;
    out.sketch.w_origin.assign(static_cast<std::size_t>(ls), ColumnOrigin::retained);
    out.sketch.v_origin.assign(static_cast<std::size_t>(ld), ColumnOrigin::retained);
    for (Index k = ls - s; k < ls; ++k) out.sketch.w_origin[k] = ColumnOrigin::optimized;
    for (Index k = ld - s; k < ld; ++k) out.sketch.v_origin[k] = ColumnOrigin::optimized;
    return out;
}

}  // namespace dotsketch
