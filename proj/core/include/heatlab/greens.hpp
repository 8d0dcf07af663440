#pragma once

// Ensemble-averaged Green functions of the block chain for large N:
//   E+ G_k = 1 + [lambda^2 G_k + w^2 (G_{k-1} + G_{k+1})] G_k,  G_0 = G_{K+1} = 0,
// the surface element G11 = 1 / (E+ - E1 - v^2 N G_1), the constant-G bulk
// semicircle, and Monte-Carlo counterparts built from sampled spectra.
// Retarded convention throughout: E+ = E + i eta, Im G < 0.

#include <complex>
#include <span>
#include <vector>

#include "heatlab/chain.hpp"

namespace heatlab {

using Complex = std::complex<double>;

struct PasturOptions {
    double damping = 0.5;
    double tolerance = 1e-12;          ///< max |G_new - G_old| / max(1, |G|)
    int max_iterations = 500;
    double residual_tolerance = 1e-10; ///< accepted residual of the block equations
};

struct GreenProfile {
    std::vector<double> grid;
    double eta = 0.0;
    Eigen::MatrixXcd g_blocks;  ///< row i = grid point, column k = block
    Eigen::VectorXcd g_surface;
    ChainParams params;
    double max_residual = 0.0;
    int max_iterations_used = 0;
    int newton_polished = 0;  ///< grid points finished by Newton steps after the fixed point stalled
};

/// Solution of the K block equations at one complex energy. `guess` (size K)
/// seeds the iteration; empty means G_k = -i / lambda'.
std::vector<Complex> pastur_point(int K, double lambda, double w, Complex z,
                                  std::span<const Complex> guess = {},
                                  const PasturOptions& options = {}, int* iterations = nullptr,
                                  bool* polished = nullptr);

/// max_k |z G_k - 1 - [lambda^2 G_k + w^2 (G_{k-1} + G_{k+1})] G_k|.
double pastur_residual(std::span<const Complex> g, double lambda, double w, Complex z);

GreenProfile pastur_solve(const ChainParams& params, std::span<const double> grid, double eta,
                          const PasturOptions& options = {});

/// lambda' G = E/(2 lambda') - i sqrt(1 - (E/(2 lambda'))^2), lambda'^2 = lambda^2 + 2 w^2.
/// Outside the band the real root that decays like 1/E is returned (Im G = 0).
Complex bulk_green(double lambda, double w, double E);
/// Retarded root of lambda'^2 G^2 - z G + 1 = 0 for Im z > 0.
Complex bulk_green(double lambda, double w, Complex z);

struct StrengthFunction {
    std::vector<double> grid;
    std::vector<double> values;
    double eta = 0.0;
    double width = 0.0;   ///< fitted Lorentzian half-width
    double fwhm = 0.0;
    double center = 0.0;
    double weight = 0.0;  ///< trapezoid integral over the grid
};

/// Wraps sampled values and fills width, center and weight from a Lorentzian fit.
StrengthFunction fitted_strength_function(std::vector<double> grid, std::vector<double> values, double eta);

/// -(1/pi) Im G11(E) with G11 = 1 / (E+ - E1 - v^2 N G_1). Width and center
/// come from a Lorentzian fit; FitError when the peak sits at the grid edge.
StrengthFunction strength_function_analytic(const GreenProfile& profile, double v, int N, double E1);
StrengthFunction strength_function_analytic(const GreenProfile& profile);

/// Ensemble average of sum_m |<m|site>|^2 delta_eta(E - E_m).
StrengthFunction strength_function_empirical(std::span<const SystemSpectrum> ensemble, int site,
                                             std::span<const double> grid, double eta);

/// -(N/pi) Im sum_k G_k(E).
std::vector<double> average_level_density(const GreenProfile& profile, int N);

}  // namespace heatlab
