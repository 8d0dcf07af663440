#pragma once

// Small fitting and quadrature helpers shared by transport, greens and the
// experiment driver.

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace heatlab {

std::vector<double> linspace(double lo, double hi, int n);

double trapezoid(std::span<const double> x, std::span<const double> y);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();  ///< (slope, intercept), from residual variance
    double residual = 0.0;                                 ///< RMS residual
};

LineFit fit_line(std::span<const double> x, std::span<const double> y);

/// Straight-line fit of log y against log x. Non-positive data is a FitError.
LineFit fit_loglog(std::span<const double> x, std::span<const double> y);

/// Least squares for design * c ~ y via column-pivoted QR.
Eigen::VectorXd least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& y);

/// y = weight * (gamma / pi) / ((x - center)^2 + gamma^2).
struct LorentzianFit {
    double weight = 0.0;
    double center = 0.0;
    double half_width = 0.0;
    double residual = 0.0;  ///< RMS over the fit window
    int window_lo = 0;
    int window_hi = 0;  ///< inclusive
};

/// Fits over the smallest window around the maximum that holds at least
/// `window_fraction` of the trapezoid weight of the whole curve.
LorentzianFit fit_lorentzian(std::span<const double> x, std::span<const double> y,
                             double window_fraction = 0.8);

}  // namespace heatlab
