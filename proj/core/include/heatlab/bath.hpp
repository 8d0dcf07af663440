#pragma once

// Local bath couplings: the site-basis surface operator Q, the
// temperature-independent kernel X, the rate matrix W(T), and the objects
// B, A of the first-order expansion around a reference temperature.

#include <cstdint>
#include <numbers>
#include <vector>

#include "heatlab/chain.hpp"

namespace heatlab {

enum class SurfaceRecipe {
    Projector,        ///< amplitude * identity on the surface states
    RandomSymmetric,  ///< GOE-like symmetric block drawn from q_seed
};

struct BathSpec {
    double temperature = 1.0;
    double a0 = 1.0 / (2.0 * std::numbers::pi);
    double delta = 1.0;  ///< bandwidth of the Gaussian energy-transfer factor
    ChainEnd end = ChainEnd::Left;
    SurfaceRecipe q_kind = SurfaceRecipe::Projector;
    double q_amplitude = 1.0;
    double q_scale = 1.0;
    std::uint64_t q_seed = 1;

    void validate() const;
};

/// Q restricted to its support: `block` is indexed like `sites`.
struct SurfaceOperator {
    std::vector<int> sites;
    Matrix block;

    /// Dense M x M site-basis matrix.
    Matrix site_matrix(Eigen::Index dimension) const;
};

struct CouplingKernel {
    Matrix x;
    BathSpec spec;
};

/// w(n, m) is the rate for m -> n at inverse temperature beta.
struct RateMatrix {
    Matrix w;
    double beta = 1.0;
};

struct PerturbationObjects {
    Matrix b;
    Vector a;
    double t0 = 1.0;
};

SurfaceOperator build_surface_operator(const BathSpec& spec, const ChainParams& params);

/// X_nm = 2 pi A0 |<m|Q|n>|^2 exp(-(E_n - E_m)^2 / (2 Delta^2)). Exactly symmetric.
CouplingKernel eigenbasis_coupling(const SurfaceOperator& q, const BathSpec& spec,
                                   const SystemSpectrum& spectrum);

/// W_nm = X_nm exp((beta/2)(E_m - E_n)), beta = 1/T.
RateMatrix rate_matrix(const Matrix& x, double temperature, const Vector& energies);
RateMatrix rate_matrix(const CouplingKernel& x, double temperature, const SystemSpectrum& spectrum);

/// B_mn = exp(-(beta0/2)(E_m + E_n)) X_mn and A_m = T0^-2 sum_n (E_m - E_n) B_mn.
PerturbationObjects perturbation_objects(const Matrix& x, double t0, const Vector& energies);
PerturbationObjects perturbation_objects(const CouplingKernel& x, double t0,
                                         const SystemSpectrum& spectrum);

}  // namespace heatlab
