#pragma once

// Small random instances shared by the unit tests.

#include <cmath>
#include <cstdint>
#include <vector>

#include "heatlab/bath.hpp"
#include "heatlab/chain.hpp"
#include "heatlab/steady_state.hpp"

namespace fixtures {

using namespace heatlab;

struct Instance {
    SystemSpectrum spectrum;
    CouplingKernel x1;
    CouplingKernel x2;
};

enum class Recipe { Equal, Similar, Dissimilar };

// K = 2, N = 20: M = 40 levels, both baths on random symmetric surface blocks.
inline Instance small_instance(Recipe recipe, std::uint64_t seed = 7, double ratio = 3.0, int K = 2, int N = 20) {
    ChainParams p;
    p.K = K;
    p.N = N;
    p.v = 0.3;
    p.n_surf = 2;
    RngStream rng(seed);
    const ChainHamiltonian h = sample_chain_hamiltonian(p, rng);
    Instance inst{diagonalize_chain(h), {}, {}};

    BathSpec b1;
    b1.q_kind = SurfaceRecipe::RandomSymmetric;
    b1.q_seed = seed + 100;
    b1.delta = 10.0 * spectral_range_estimate(h);
    inst.x1 = eigenbasis_coupling(build_surface_operator(b1, p), b1, inst.spectrum);

    BathSpec b2 = b1;
    switch (recipe) {
        case Recipe::Equal:
            inst.x2 = inst.x1;
            break;
        case Recipe::Similar:
            inst.x2 = inst.x1;
            inst.x2.x = inst.x1.x / ratio;
            break;
        case Recipe::Dissimilar:
            b2.end = ChainEnd::Right;
            b2.q_seed = seed + 200;
            inst.x2 = eigenbasis_coupling(build_surface_operator(b2, p), b2, inst.spectrum);
            break;
    }
    return inst;
}

inline std::pair<PerturbationObjects, PerturbationObjects> perturbations(const Instance& inst, double t0) {
    return {perturbation_objects(inst.x1, t0, inst.spectrum), perturbation_objects(inst.x2, t0, inst.spectrum)};
}

inline PerturbationProvider provider(const Instance& inst) {
    return [&inst](double t0) { return perturbations(inst, t0); };
}

inline SteadyState exact_state(const Instance& inst, double t1, double t2) {
    return stationary_exact(rate_matrix(inst.x1, t1, inst.spectrum), rate_matrix(inst.x2, t2, inst.spectrum));
}

// Two-level spectrum with identity modes.
inline SystemSpectrum two_level(double e0 = 0.0, double e1 = 1.0) {
    SystemSpectrum s;
    s.energies = Vector(2);
    s.energies << e0, e1;
    s.modes = Matrix::Identity(2, 2);
    s.params.K = 1;
    s.params.N = 2;
    return s;
}

inline double max_abs(const Vector& v) { return v.cwiseAbs().maxCoeff(); }

}  // namespace fixtures
