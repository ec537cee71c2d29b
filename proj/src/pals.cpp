#include "dotsketch/pals.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace dotsketch {

double wendland_c2(double r) {
    if (r < 0.0) throw std::invalid_argument("wendland_c2: negative radius");
    if (r >= 1.0) return 0.0;
    const double t = 1.0 - r;
    const double t2 = t * t;
    return t2 * t2 * (4.0 * r + 1.0);
}

double wendland_c2_derivative(double r) {
    if (r < 0.0) throw std::invalid_argument("wendland_c2_derivative: negative radius");
    if (r >= 1.0) return 0.0;
    const double t = 1.0 - r;
    return -20.0 * r * t * t * t;
}

double heaviside(double r, double eps) { return 0.5 + std::atan(r / eps) / std::numbers::pi; }

double heaviside_derivative(double r, double eps) {
    return eps / (std::numbers::pi * (r * r + eps * eps));
}

void PalsModel::validate() const {
    if (basis_count < 1) throw std::invalid_argument("PaLS model needs at least one basis");
    if (!(gamma > 0.0)) throw std::invalid_argument("PaLS gamma must be positive");
    if (!(epsilon > 0.0)) throw std::invalid_argument("PaLS epsilon must be positive");
    if (!(mu_in > mu_out) || mu_out < 0.0) {
        throw std::invalid_argument("PaLS requires mu_in > mu_out >= 0");
    }
}

ParamVector::ParamVector(Eigen::VectorXd values) : values_(std::move(values)) {
    if (values_.size() % kPerBasis != 0) {
        throw std::invalid_argument("parameter vector length must be a multiple of 4");
    }
}

void ParamVector::set_basis(Eigen::Index j, double alpha, double beta, Eigen::Vector2d center) {
    values_(alpha_index(j)) = alpha;
    values_(beta_index(j)) = beta;
    values_(center_x_index(j)) = center.x();
    values_(center_y_index(j)) = center.y();
}

namespace {

void check_sizes(const PalsModel& model, const ParamVector& p) {
    model.validate();
    if (p.basis_count() != model.basis_count) {
        throw std::invalid_argument("parameter vector does not match the PaLS basis count");
    }
}

// Squared support radius in |x - chi|^2 units: beta^2 d^2 + gamma^2 < 1.
double support_d2(const PalsModel& model, double beta) {
    return (1.0 - model.gamma * model.gamma) / (beta * beta);
}

}  // namespace

Eigen::VectorXd pals_eval(const PalsModel& model, const ParamVector& p, const PointList& pts) {
    check_sizes(model, p);
    Eigen::VectorXd phi = Eigen::VectorXd::Zero(pts.rows());
    const double g2 = model.gamma * model.gamma;
    for (Eigen::Index j = 0; j < p.basis_count(); ++j) {
        const double alpha = p.alpha(j);
        const double b2 = p.beta(j) * p.beta(j);
        const Eigen::Vector2d chi = p.center(j);
        if (alpha == 0.0 || b2 == 0.0) {
            // beta = 0 makes the basis constant psi(gamma) everywhere.
            if (alpha != 0.0) phi.array() += alpha * wendland_c2(model.gamma);
            continue;
        }
        const double reach = support_d2(model, p.beta(j));
        for (Eigen::Index n = 0; n < pts.rows(); ++n) {
            const double d2 = (pts.row(n).transpose() - chi).squaredNorm();
            if (d2 >= reach) continue;
            phi(n) += alpha * wendland_c2(std::sqrt(b2 * d2 + g2));
        }
    }
    return phi;
}

Eigen::VectorXd mu_from_pals(const PalsModel& model, const ParamVector& p, const PointList& pts) {
    const Eigen::VectorXd phi = pals_eval(model, p, pts);
    Eigen::VectorXd mu(phi.size());
    for (Eigen::Index n = 0; n < phi.size(); ++n) {
        mu(n) = model.mu_out + (model.mu_in - model.mu_out) * heaviside(phi(n) - model.tau, model.epsilon);
    }
    return mu;
}

Eigen::SparseMatrix<double> dmu_dp_sparse(const PalsModel& model, const ParamVector& p,
                                          const PointList& pts) {
    const Eigen::VectorXd phi = pals_eval(model, p, pts);
    const double contrast = model.mu_in - model.mu_out;
    const double g2 = model.gamma * model.gamma;

    std::vector<Eigen::Triplet<double>> trip;
    for (Eigen::Index j = 0; j < p.basis_count(); ++j) {
        const double alpha = p.alpha(j);
        const double beta = p.beta(j);
        const double b2 = beta * beta;
        const Eigen::Vector2d chi = p.center(j);
        const Eigen::Index ka = ParamVector::alpha_index(j);
        const Eigen::Index kb = ParamVector::beta_index(j);
        const Eigen::Index kx = ParamVector::center_x_index(j);
        const Eigen::Index ky = ParamVector::center_y_index(j);
        const bool global = b2 == 0.0;
        const double reach = global ? 0.0 : support_d2(model, beta);

        for (Eigen::Index n = 0; n < pts.rows(); ++n) {
            const Eigen::Vector2d diff = pts.row(n).transpose() - chi;
            const double d2 = diff.squaredNorm();
            if (!global && d2 >= reach) continue;
            const double r = std::sqrt(b2 * d2 + g2);
            const double scale = contrast * heaviside_derivative(phi(n) - model.tau, model.epsilon);
            const double dpsi = wendland_c2_derivative(r);
            trip.emplace_back(n, ka, scale * wendland_c2(r));
            trip.emplace_back(n, kb, scale * alpha * dpsi * beta * d2 / r);
            trip.emplace_back(n, kx, -scale * alpha * dpsi * b2 * diff.x() / r);
            trip.emplace_back(n, ky, -scale * alpha * dpsi * b2 * diff.y() / r);
        }
    }
    Eigen::SparseMatrix<double> S(pts.rows(), p.size());
    S.setFromTriplets(trip.begin(), trip.end());
    S.makeCompressed();
    return S;
}

Eigen::MatrixXd dmu_dp(const PalsModel& model, const ParamVector& p, const PointList& pts) {
    return Eigen::MatrixXd(dmu_dp_sparse(model, p, pts));
}

}  // namespace dotsketch
