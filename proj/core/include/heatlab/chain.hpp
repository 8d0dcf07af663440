#pragma once

// Block-tridiagonal GOE chain: K blocks of dimension N, nearest-neighbour
// Gaussian couplings, and distinguished surface states at both ends.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "heatlab/random.hpp"

namespace heatlab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class ChainEnd { Left, Right };

struct ChainParams {
    int K = 4;             ///< block count, the length proxy
    int N = 100;           ///< block dimension
    double lambda = 1.0;   ///< intra-block GOE scale
    double w = 0.5;        ///< inter-block coupling scale
    double v = 0.05;       ///< surface-state coupling scale, <V_mu V_nu> = v^2 delta
    double E1 = 0.0;       ///< surface-state diagonal energy
    int n_surf = 1;        ///< surface states per end
    std::uint64_t seed = 20240611;

    /// Throws ParameterError on invalid values. Returns soft warnings
    /// (w > lambda) without emitting them.
    std::vector<std::string> validate() const;

    int dimension() const noexcept { return K * N; }

    /// sqrt(lambda^2 + 2 w^2 (K-1)/K): lambda for a single block,
    /// sqrt(lambda^2 + w^2) for K = 2, sqrt(lambda^2 + 2 w^2) as K grows.
    double effective_lambda() const noexcept;

    /// Bulk closed-form lambda' = sqrt(lambda^2 + 2 w^2).
    double bulk_lambda() const noexcept;

    /// 1 / rho(0) of the semicircle with radius 2 lambda'_eff: pi lambda'_eff / (K N).
    double mean_level_spacing() const noexcept;
};

/// Site indices of the surface states at one end of the chain.
std::vector<int> surface_sites(const ChainParams& params, ChainEnd end);

struct ChainHamiltonian {
    Matrix matrix;
    ChainParams params;
};

/// Eigen-decomposition with energies ascending; column m of `modes` is |m>.
struct SystemSpectrum {
    Vector energies;
    Matrix modes;
    ChainParams params;

    Eigen::Index size() const noexcept { return energies.size(); }
};

ChainHamiltonian sample_chain_hamiltonian(const ChainParams& params, RngStream& rng);

SystemSpectrum diagonalize_chain(const ChainHamiltonian& h);

/// rho_eta(E) = (1/pi) sum_m eta / ((E - E_m)^2 + eta^2).
std::vector<double> smoothed_level_density(const SystemSpectrum& spectrum,
                                           std::span<const double> grid, double eta);

/// sqrt(Tr(H^2) / (K N)).
double spectral_range_estimate(const ChainHamiltonian& h);

}  // namespace heatlab
