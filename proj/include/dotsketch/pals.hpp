#pragma once

// Parametric level-set (PaLS) absorption model.
//
//   phi(x; p) = sum_j alpha_j psi( sqrt(beta_j^2 |x - chi_j|^2 + gamma^2) )
//   mu(x; p)  = mu_out + (mu_in - mu_out) H_eps(phi(x; p) - tau)
//
// psi is the Wendland C2 function (1-r)_+^4 (4r+1) and H_eps the arctan
// Heaviside. Dilations enter squared, so a sign flip of beta is harmless.

#include <span>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace dotsketch {

double wendland_c2(double r);
double wendland_c2_derivative(double r);

double heaviside(double r, double eps);
double heaviside_derivative(double r, double eps);

struct PalsModel {
    int basis_count = 25;
    double gamma = 1e-2;
    double epsilon = 0.01;
    double tau = 0.15;
    double mu_in = 0.2;
    double mu_out = 0.01;

    void validate() const;
    Eigen::Index param_count() const { return 4 * static_cast<Eigen::Index>(basis_count); }
};

/// Flattened PaLS parameters, four per basis: [alpha, beta, chi_x, chi_y].
class ParamVector {
public:
    ParamVector() = default;
    explicit ParamVector(Eigen::VectorXd values);

    static constexpr Eigen::Index kPerBasis = 4;
    static Eigen::Index alpha_index(Eigen::Index j) { return kPerBasis * j; }
    static Eigen::Index beta_index(Eigen::Index j) { return kPerBasis * j + 1; }
    static Eigen::Index center_x_index(Eigen::Index j) { return kPerBasis * j + 2; }
    static Eigen::Index center_y_index(Eigen::Index j) { return kPerBasis * j + 3; }

    Eigen::Index basis_count() const { return values_.size() / kPerBasis; }
    Eigen::Index size() const { return values_.size(); }

    double alpha(Eigen::Index j) const { return values_(alpha_index(j)); }
    double beta(Eigen::Index j) const { return values_(beta_index(j)); }
    Eigen::Vector2d center(Eigen::Index j) const {
        return {values_(center_x_index(j)), values_(center_y_index(j))};
    }
    void set_basis(Eigen::Index j, double alpha, double beta, Eigen::Vector2d center);

    const Eigen::VectorXd& values() const { return values_; }
    Eigen::VectorXd& values() { return values_; }

private:
    Eigen::VectorXd values_;
};

using PointList = Eigen::MatrixX2d;

Eigen::VectorXd pals_eval(const PalsModel& model, const ParamVector& p, const PointList& pts);

Eigen::VectorXd mu_from_pals(const PalsModel& model, const ParamVector& p, const PointList& pts);

/// d(mu)/d(p) as a sparse n_pts x n_p matrix; column k holds only points
/// inside the support of the basis that owns parameter k.
Eigen::SparseMatrix<double> dmu_dp_sparse(const PalsModel& model, const ParamVector& p,
                                          const PointList& pts);

Eigen::MatrixXd dmu_dp(const PalsModel& model, const ParamVector& p, const PointList& pts);

}  // namespace dotsketch
