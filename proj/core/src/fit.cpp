#include "heatlab/fit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <unsupported/Eigen/LevenbergMarquardt>

#include "heatlab/errors.hpp"

namespace heatlab {

std::vector<double> linspace(double lo, double hi, int n) {
    if (n < 1) throw ParameterError("linspace: need at least one point");
    std::vector<double> out(static_cast<std::size_t>(n));
    if (n == 1) {
        out[0] = lo;
        return out;
    }
    const double h = (hi - lo) / (n - 1);
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = lo + h * i;
    out.back() = hi;
    return out;
}

double trapezoid(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ParameterError("trapezoid: size mismatch");
    double acc = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) acc += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
    return acc;
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ParameterError("fit_line: size mismatch");
    const auto n = static_cast<Eigen::Index>(x.size());
    if (n < 2) throw FitError("fit_line: need at least two points");

    Eigen::MatrixXd design(n, 2);
    Eigen::VectorXd rhs(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        design(i, 0) = x[static_cast<std::size_t>(i)];
        design(i, 1) = 1.0;
        rhs[i] = y[static_cast<std::size_t>(i)];
    }
    const Eigen::VectorXd c = least_squares(design, rhs);
    const Eigen::VectorXd r = rhs - design * c;

    LineFit fit;
    fit.slope = c[0];
    fit.intercept = c[1];
    fit.residual = std::sqrt(r.squaredNorm() / static_cast<double>(n));
    if (n > 2) {
        const double s2 = r.squaredNorm() / static_cast<double>(n - 2);
        fit.covariance = s2 * (design.transpose() * design).inverse();
    }
    return fit;
}

LineFit fit_loglog(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ParameterError("fit_loglog: size mismatch");
    std::vector<double> lx(x.size()), ly(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw FitError("fit_loglog: data must be positive");
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
    }
    return fit_line(lx, ly);
}

Eigen::VectorXd least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& y) {
    if (design.rows() != y.size()) throw ParameterError("least_squares: size mismatch");
    if (design.rows() < design.cols()) throw FitError("least_squares: underdetermined system");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < design.cols()) throw FitError("least_squares: rank-deficient design");
    return qr.solve(y);
}

namespace {

// Parameters: weight, center, log(half width).
struct LorentzResidual : Eigen::DenseFunctor<double> {
    std::span<const double> x;
    std::span<const double> y;

    LorentzResidual(std::span<const double> xs, std::span<const double> ys)
        : DenseFunctor<double>(3, static_cast<int>(xs.size())), x(xs), y(ys) {}

    int operator()(const InputType& p, ValueType& f) const {
        const double g = std::exp(p[2]);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = x[i] - p[1];
            f[static_cast<Eigen::Index>(i)] = p[0] * g / std::numbers::pi / (d * d + g * g) - y[i];
        }
        return 0;
    }

    int df(const InputType& p, JacobianType& jac) const {
        const double g = std::exp(p[2]);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            const double d = x[i] - p[1];
            const double den = d * d + g * g;
            jac(r, 0) = g / std::numbers::pi / den;
            jac(r, 1) = p[0] * g / std::numbers::pi * 2.0 * d / (den * den);
            jac(r, 2) = g * p[0] / std::numbers::pi * (d * d - g * g) / (den * den);
        }
        return 0;
    }
};

}  // namespace

LorentzianFit fit_lorentzian(std::span<const double> x, std::span<const double> y, double window_fraction) {
    if (x.size() != y.size()) throw ParameterError("fit_lorentzian: size mismatch");
    const int n = static_cast<int>(x.size());
    if (n < 5) throw FitError("fit_lorentzian: need at least five points");

    const int peak = static_cast<int>(std::max_element(y.begin(), y.end()) - y.begin());
    if (peak == 0 || peak == n - 1) throw FitError("fit_lorentzian: peak lies at the grid edge");
    const double ymax = y[static_cast<std::size_t>(peak)];
    if (!(ymax > 0.0)) throw FitError("fit_lorentzian: curve has no positive peak");

    const double total = trapezoid(x, y);
    if (!(total > 0.0)) throw FitError("fit_lorentzian: curve carries no weight");

    int lo = peak;
    int hi = peak;
    auto window_weight = [&] {
        return trapezoid(x.subspan(static_cast<std::size_t>(lo), static_cast<std::size_t>(hi - lo + 1)),
                         y.subspan(static_cast<std::size_t>(lo), static_cast<std::size_t>(hi - lo + 1)));
    };
    while ((window_weight() < window_fraction * total || hi - lo + 1 < 5) && (lo > 0 || hi < n - 1)) {
        const double left = lo > 0 ? y[static_cast<std::size_t>(lo - 1)] : -1.0;
        const double right = hi < n - 1 ? y[static_cast<std::size_t>(hi + 1)] : -1.0;
        if (left >= right) {
            --lo;
        } else {
            ++hi;
        }
    }

    // Starting half width from the half-maximum crossings.
    int a = peak;
    while (a > 0 && y[static_cast<std::size_t>(a)] > 0.5 * ymax) --a;
    int b = peak;
    while (b < n - 1 && y[static_cast<std::size_t>(b)] > 0.5 * ymax) ++b;
    double g0 = 0.5 * (x[static_cast<std::size_t>(b)] - x[static_cast<std::size_t>(a)]);
    if (!(g0 > 0.0)) g0 = x[1] - x[0];

    const auto xs = x.subspan(static_cast<std::size_t>(lo), static_cast<std::size_t>(hi - lo + 1));
    const auto ys = y.subspan(static_cast<std::size_t>(lo), static_cast<std::size_t>(hi - lo + 1));
    LorentzResidual functor(xs, ys);
    Eigen::LevenbergMarquardt<LorentzResidual> lm(functor);
    lm.setMaxfev(2000);
    Eigen::VectorXd p(3);
    p << ymax * std::numbers::pi * g0, x[static_cast<std::size_t>(peak)], std::log(g0);
    const auto status = lm.minimize(p);
    if (status == Eigen::LevenbergMarquardtSpace::ImproperInputParameters || !p.allFinite()) {
        throw FitError("fit_lorentzian: optimizer failed");
    }

    Eigen::VectorXd f(xs.size());
    functor(p, f);

    LorentzianFit out;
    out.weight = p[0];
    out.center = p[1];
    out.half_width = std::exp(p[2]);
    out.residual = std::sqrt(f.squaredNorm() / static_cast<double>(f.size()));
    out.window_lo = lo;
    out.window_hi = hi;
    if (out.center < x.front() || out.center > x.back()) throw FitError("fit_lorentzian: fitted center left the grid");
    return out;
}

}  // namespace heatlab
