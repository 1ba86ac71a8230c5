#ifndef CAVFB_LEAST_SQUARES_HPP
#define CAVFB_LEAST_SQUARES_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string_view>

namespace cavfb
{
enum class FitStatus
{
    converged,
    max_iter,
    singular,
};

constexpr std::string_view to_string(FitStatus s) noexcept
{
    switch (s) {
    case FitStatus::converged: return "converged";
    case FitStatus::max_iter: return "max-iter";
    case FitStatus::singular: return "singular";
    }
    return "unknown";
}

struct LmOptions
{
    int max_iter = 500;
    double ftol = 1e-14;      // relative cost decrease
    double xtol = 1e-12;      // relative step
    double gtol = 1e-14;      // scaled gradient
    double fd_step = 1e-6;    // relative central-difference step
    double lambda0 = 1e-3;
    Eigen::VectorXd x_scale;  // typical magnitudes; guards steps for parameters near zero
};

struct LmResult
{
    Eigen::VectorXd x;
    Eigen::VectorXd errors;      // 1-sigma, scaled by the reduced chi-square
    Eigen::MatrixXd covariance;
    double cost = 0.0;           // sum of squared residuals
    double initial_cost = 0.0;
    int iterations = 0;
    FitStatus status = FitStatus::max_iter;
};

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

inline Eigen::MatrixXd numeric_jacobian(const ResidualFn& f, const Eigen::VectorXd& x, const LmOptions& opt)
{
    const Eigen::VectorXd r0 = f(x);
    Eigen::MatrixXd j(r0.size(), x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        const double scale = opt.x_scale.size() == x.size() ? opt.x_scale[k] : 0.0;
        double h = opt.fd_step * std::max(std::abs(x[k]), scale);
        if (h == 0.0) h = opt.fd_step;
        Eigen::VectorXd xp = x, xm = x;
        xp[k] += h;
        xm[k] -= h;
        j.col(k) = (f(xp) - f(xm)) / (xp[k] - xm[k]);
    }
    return j;
}

// Levenberg-Marquardt with Marquardt diagonal scaling and central-difference
// Jacobians. Never returns a point worse than the start.
inline LmResult levenberg_marquardt(const ResidualFn& f, Eigen::VectorXd x, const LmOptions& opt = {})
{
    LmResult out;
    Eigen::VectorXd r = f(x);
    double cost = r.squaredNorm();
    out.initial_cost = cost;
    double lambda = opt.lambda0;
    const Eigen::Index n = x.size();
    Eigen::MatrixXd j = numeric_jacobian(f, x, opt);
    bool done = false;

    for (out.iterations = 0; out.iterations < opt.max_iter && !done; ++out.iterations) {
        const Eigen::MatrixXd jtj = j.transpose() * j;
        const Eigen::VectorXd g = j.transpose() * r;
        Eigen::VectorXd d = jtj.diagonal().cwiseMax(1e-300);
        if ((g.cwiseAbs().array() / (d.array().sqrt() * std::sqrt(std::max(cost, 1e-300)))).maxCoeff() < opt.gtol) {
            out.status = FitStatus::converged;
            break;
        }
        bool accepted = false;
        for (int inner = 0; inner < 60; ++inner) {
            Eigen::MatrixXd a = jtj;
            a.diagonal() += lambda * d;
            const Eigen::VectorXd step = a.ldlt().solve(-g);
            if (!step.allFinite()) {
                lambda *= 10.0;
                continue;
            }
            const Eigen::VectorXd xn = x + step;
            const Eigen::VectorXd rn = f(xn);
            const double cn = rn.allFinite() ? rn.squaredNorm() : std::numeric_limits<double>::infinity();
            if (cn < cost) {
                const double rel_drop = (cost - cn) / std::max(cost, 1e-300);
                const double rel_step = step.norm() / (x.norm() + opt.xtol);
                x = xn;
                r = rn;
                cost = cn;
                lambda = std::max(lambda / 10.0, 1e-12);
                accepted = true;
                if (rel_drop < opt.ftol || rel_step < opt.xtol) {
                    out.status = FitStatus::converged;
                    done = true;
                }
                break;
            }
            lambda *= 10.0;
            if (lambda > 1e16) break;
        }
        if (!accepted) {
            // No descent direction left: the current point is a minimum to
            // working precision.
            out.status = FitStatus::converged;
            break;
        }
        j = numeric_jacobian(f, x, opt);
    }
    if (!done && out.status != FitStatus::converged) out.status = FitStatus::max_iter;

    out.x = x;
    out.cost = cost;
    j = numeric_jacobian(f, x, opt);
    const Eigen::MatrixXd jtj = j.transpose() * j;
    // Rank check on the column-normalized normal matrix.
    Eigen::VectorXd norms = jtj.diagonal().cwiseSqrt();
    bool singular = (norms.array() == 0.0).any();
    if (!singular) {
        const Eigen::MatrixXd scaled = norms.cwiseInverse().asDiagonal() * jtj * norms.cwiseInverse().asDiagonal();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(scaled);
        singular = es.eigenvalues().minCoeff() < 1e-12 * es.eigenvalues().maxCoeff();
    }
    if (singular) {
        out.status = FitStatus::singular;
        out.covariance = Eigen::MatrixXd::Constant(n, n, std::numeric_limits<double>::quiet_NaN());
        out.errors = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN());
        return out;
    }
    const Eigen::Index dof = std::max<Eigen::Index>(r.size() - n, 1);
    out.covariance = jtj.inverse() * (cost / static_cast<double>(dof));
    out.errors = out.covariance.diagonal().cwiseSqrt();
    return out;
}

}  // namespace cavfb

#endif  // CAVFB_LEAST_SQUARES_HPP
