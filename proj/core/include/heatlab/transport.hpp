#pragma once

// Heat current and conductance. Sign convention: I is the energy per unit
// time flowing from bath 2 into the system, which at stationarity equals the
// flow from the system into bath 1. dT = (T2 - T1) / 2.

#include <span>
#include <string>
#include <vector>

#include "heatlab/steady_state.hpp"

namespace heatlab {

/// I = sum_mn E_n [W2_nm P_m - W2_mn P_n].
double heat_current_exact(const Vector& energies, const RateMatrix& w2, const Vector& p);

/// sum_mn E_n [W1_mn P_n - W1_nm P_m], the flow into bath 1.
double bath1_outflow(const Vector& energies, const RateMatrix& w1, const Vector& p);

/// Ingredients of the equilibrium coefficient at T0:
/// numerator = sum_mn (E_m - E_n)^2 exp(-(beta0/2)(E_m + E_n)) X_mn,
/// partition = sum_m exp(-beta0 E_m).
struct GreenKuboTerms {
    double numerator = 0.0;
    double partition = 0.0;
};

GreenKuboTerms green_kubo_terms(const Vector& energies, const Matrix& x, double t0);

/// gamma / T0^2 * numerator / partition, the single expression every
/// conductance in this module reduces to.
double equilibrium_conductance(const GreenKuboTerms& terms, double t0, double gamma) noexcept;

/// C = (gamma / T0^2) (1 / Z) sum_mn (E_m - E_n)^2 exp(-(beta0/2)(E_m + E_n)) X_mn.
double conductance_green_kubo(const Vector& energies, const Matrix& x, double t0, double gamma);

struct TransportResult {
    double current = 0.0;      ///< C * dT
    double conductance = 0.0;  ///< headline C
    double delta_t = 0.0;

    CouplingClass klass;
    double t0 = 0.0;
    double alpha = 0.5;
    double gamma = 0.5;
    /// Green-Kubo ingredients behind the headline value (bath-1 kernel at t0).
    double numerator = 0.0;
    double partition = 0.0;

    /// Second evaluation: the bath-2 form. For Dissimilar couplings it is
    /// taken at its own reference point (t0_2, alpha_2).
    double conductance_1 = 0.0;
    double conductance_2 = 0.0;
    double t0_2 = 0.0;
    double alpha_2 = 0.5;
    double form_spread = 0.0;  ///< |C1 - C2| / mean

    bool alpha_out_of_range = false;
    std::vector<std::string> warnings;
};

struct LinearResponseOptions {
    double class_tol = 1e-8;
    ReferenceOptions reference;
};

TransportResult conductance_linear_response(const Vector& energies, const CouplingKernel& x1,
                                            const CouplingKernel& x2, double t1, double t2,
                                            const LinearResponseOptions& options = {});
TransportResult conductance_linear_response(const SystemSpectrum& spectrum, const CouplingKernel& x1,
                                            const CouplingKernel& x2, double t1, double t2,
                                            const LinearResponseOptions& options = {});

struct LinearityFit {
    double conductance = 0.0;  ///< C in I = C dT + q dT^2
    double curvature = 0.0;    ///< q
    double residual = 0.0;     ///< RMS of the fit residuals
};

LinearityFit fourier_linearity_fit(std::span<const double> delta_t, std::span<const double> currents);

}  // namespace heatlab
