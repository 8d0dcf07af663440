#include "heatlab/bath.hpp"

#include <cmath>

#include "heatlab/errors.hpp"

namespace heatlab {

void BathSpec::validate() const {
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
        throw ParameterError("bath: temperature must be > 0");
    }
    if (!(a0 > 0.0) || !std::isfinite(a0)) throw ParameterError("bath: a0 must be > 0");
    if (!(delta > 0.0)) throw ParameterError("bath: delta must be > 0");
    if (!std::isfinite(q_amplitude) || !std::isfinite(q_scale)) {
        throw ParameterError("bath: surface operator scales must be finite");
    }
}

Matrix SurfaceOperator::site_matrix(Eigen::Index dimension) const {
    Matrix q = Matrix::Zero(dimension, dimension);
    const auto n = static_cast<Eigen::Index>(sites.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            q(sites[static_cast<std::size_t>(i)], sites[static_cast<std::size_t>(j)]) = block(i, j);
        }
    }
    return q;
}

SurfaceOperator build_surface_operator(const BathSpec& spec, const ChainParams& params) {
    if (params.K < 1) throw ParameterError("surface operator: chain has no end block");
    params.validate();

    SurfaceOperator q;
    q.sites = surface_sites(params, spec.end);
    const auto n = static_cast<Eigen::Index>(q.sites.size());

    switch (spec.q_kind) {
        case SurfaceRecipe::Projector:
            q.block = spec.q_amplitude * Matrix::Identity(n, n);
            break;
        case SurfaceRecipe::RandomSymmetric: {
            // Drawn from the bath's own sub-seed only, so Q is the same for every K.
            RngStream rng(spec.q_seed);
            q.block = Matrix::Zero(n, n);
            for (Eigen::Index i = 0; i < n; ++i) {
                q.block(i, i) = rng.normal(std::sqrt(2.0) * spec.q_scale);
                for (Eigen::Index j = i + 1; j < n; ++j) {
                    const double x = rng.normal(spec.q_scale);
                    q.block(i, j) = x;
                    q.block(j, i) = x;
                }
            }
            break;
        }
    }
    return q;
}

CouplingKernel eigenbasis_coupling(const SurfaceOperator& q, const BathSpec& spec,
                                   const SystemSpectrum& spectrum) {
    spec.validate();
    const Eigen::Index M = spectrum.size();
    if (spectrum.modes.rows() != M || spectrum.modes.cols() != M) {
        throw ParameterError("eigenbasis_coupling: spectrum modes must be M x M");
    }
    for (int s : q.sites) {
        if (s < 0 || s >= M) throw ParameterError("eigenbasis_coupling: surface site outside the chain");
    }

    const auto n = static_cast<Eigen::Index>(q.sites.size());
    Matrix us(n, M);  // rows of U at the surface sites
    for (Eigen::Index i = 0; i < n; ++i) us.row(i) = spectrum.modes.row(q.sites[static_cast<std::size_t>(i)]);
    const Matrix qe = us.transpose() * (q.block * us);

    const double pref = 2.0 * std::numbers::pi * spec.a0;
    const double inv2d2 = 1.0 / (2.0 * spec.delta * spec.delta);
    const Vector& e = spectrum.energies;

    Matrix x(M, M);
    for (Eigen::Index m = 0; m < M; ++m) {
        for (Eigen::Index k = m; k < M; ++k) {
            const double d = e[k] - e[m];
            const double val = pref * qe(m, k) * qe(m, k) * std::exp(-d * d * inv2d2);
            x(m, k) = val;
            x(k, m) = val;
        }
    }
    return {std::move(x), spec};
}

RateMatrix rate_matrix(const Matrix& x, double temperature, const Vector& energies) {
    if (!(temperature > 0.0)) throw ParameterError("rate_matrix: temperature must be > 0");
    const Eigen::Index M = energies.size();
    if (x.rows() != M || x.cols() != M) throw ParameterError("rate_matrix: dimension mismatch");

    const double beta = 1.0 / temperature;
    RateMatrix r{Matrix(M, M), beta};
    for (Eigen::Index m = 0; m < M; ++m) {
        for (Eigen::Index n = 0; n < M; ++n) {
            r.w(n, m) = x(n, m) * std::exp(0.5 * beta * (energies[m] - energies[n]));
        }
    }
    return r;
}

RateMatrix rate_matrix(const CouplingKernel& x, double temperature, const SystemSpectrum& spectrum) {
    return rate_matrix(x.x, temperature, spectrum.energies);
}

PerturbationObjects perturbation_objects(const Matrix& x, double t0, const Vector& energies) {
    if (!(t0 > 0.0)) throw ParameterError("perturbation_objects: t0 must be > 0");
    const Eigen::Index M = energies.size();
    if (x.rows() != M || x.cols() != M) throw ParameterError("perturbation_objects: dimension mismatch");

    const double beta0 = 1.0 / t0;
    PerturbationObjects out{Matrix(M, M), Vector::Zero(M), t0};
    for (Eigen::Index m = 0; m < M; ++m) {
        for (Eigen::Index n = m; n < M; ++n) {
            const double b = std::exp(-0.5 * beta0 * (energies[m] + energies[n])) * x(m, n);
            out.b(m, n) = b;
            out.b(n, m) = b;
        }
    }
    const double inv_t2 = 1.0 / (t0 * t0);
    for (Eigen::Index m = 0; m < M; ++m) {
        double acc = 0.0;
        for (Eigen::Index n = 0; n < M; ++n) acc += (energies[m] - energies[n]) * out.b(m, n);
        out.a[m] = inv_t2 * acc;
    }
    return out;
}

PerturbationObjects perturbation_objects(const CouplingKernel& x, double t0,
                                         const SystemSpectrum& spectrum) {
    return perturbation_objects(x.x, t0, spectrum.energies);
}

}  // namespace heatlab
