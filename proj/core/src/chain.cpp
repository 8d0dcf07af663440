#include "heatlab/chain.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "heatlab/errors.hpp"

namespace heatlab {

std::vector<std::string> ChainParams::validate() const {
    auto fail = [](const std::string& what) { throw ParameterError("chain: " + what); };
    if (K < 1) fail("K must be >= 1");
    if (N < 2) fail("N must be >= 2");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) fail("lambda must be > 0");
    if (!(w >= 0.0) || !std::isfinite(w)) fail("w must be >= 0");
    if (!(v >= 0.0) || !std::isfinite(v)) fail("v must be >= 0");
    if (!std::isfinite(E1)) fail("E1 must be finite");
    if (n_surf < 1 || n_surf >= N) fail("n_surf must satisfy 1 <= n_surf < N");
    if (K == 1 && 2 * n_surf >= N) fail("K = 1 places both surfaces in one block; need 2 n_surf < N");

    std::vector<std::string> warnings;
    if (w > lambda) {
        std::ostringstream os;
        os << "inter-block coupling w = " << w << " exceeds lambda = " << lambda;
        warnings.push_back(os.str());
    }
    return warnings;
}

double ChainParams::effective_lambda() const noexcept {
    const double frac = K > 1 ? static_cast<double>(K - 1) / K : 0.0;
    return std::sqrt(lambda * lambda + 2.0 * w * w * frac);
}

double ChainParams::bulk_lambda() const noexcept { return std::sqrt(lambda * lambda + 2.0 * w * w); }

double ChainParams::mean_level_spacing() const noexcept {
    return std::numbers::pi * effective_lambda() / static_cast<double>(dimension());
}

std::vector<int> surface_sites(const ChainParams& params, ChainEnd end) {
    std::vector<int> sites(static_cast<std::size_t>(params.n_surf));
    const int first = end == ChainEnd::Left ? 0 : params.dimension() - params.n_surf;
    for (int i = 0; i < params.n_surf; ++i) sites[static_cast<std::size_t>(i)] = first + i;
    return sites;
}

namespace {

void attach_surface(Matrix& h, const ChainParams& p, ChainEnd end, RngStream& rng) {
    const auto sites = surface_sites(p, end);
    const int block = end == ChainEnd::Left ? 0 : p.K - 1;
    const int lo = block * p.N;
    const int hi = lo + p.N;
    const int M = p.dimension();

    auto is_surface = [&](int i) { return i >= sites.front() && i <= sites.back(); };

    for (int s : sites) {
        for (int j = 0; j < M; ++j) {
            h(s, j) = 0.0;
            h(j, s) = 0.0;
        }
    }
    for (int s : sites) {
        h(s, s) = p.E1;
        for (int j = lo; j < hi; ++j) {
            if (is_surface(j)) continue;
            const double coupling = rng.normal(p.v);
            h(s, j) = coupling;
            h(j, s) = coupling;
        }
    }
}

}  // namespace

ChainHamiltonian sample_chain_hamiltonian(const ChainParams& params, RngStream& rng) {
    for (const auto& msg : params.validate()) warn(msg);

    const int K = params.K;
    const int N = params.N;
    const double off_sd = params.lambda / std::sqrt(static_cast<double>(N));
    const double diag_sd = std::sqrt(2.0) * off_sd;
    const double w_sd = params.w / std::sqrt(static_cast<double>(N));

    Matrix h = Matrix::Zero(params.dimension(), params.dimension());
    for (int k = 0; k < K; ++k) {
        const int o = k * N;
        for (int i = 0; i < N; ++i) {
            h(o + i, o + i) = rng.normal(diag_sd);
            for (int j = i + 1; j < N; ++j) {
                const double x = rng.normal(off_sd);
                h(o + i, o + j) = x;
                h(o + j, o + i) = x;
            }
        }
        if (k + 1 < K) {
            const int o2 = o + N;
            for (int i = 0; i < N; ++i) {
                for (int j = 0; j < N; ++j) {
                    const double x = rng.normal(w_sd);
                    h(o + i, o2 + j) = x;
                    h(o2 + j, o + i) = x;
                }
            }
        }
    }
    attach_surface(h, params, ChainEnd::Left, rng);
    attach_surface(h, params, ChainEnd::Right, rng);
    return {std::move(h), params};
}

SystemSpectrum diagonalize_chain(const ChainHamiltonian& h) {
    const Matrix& m = h.matrix;
    if (m.rows() != m.cols() || m.rows() == 0) {
        throw ParameterError("diagonalize_chain: matrix must be square and non-empty");
    }
    if (!m.allFinite()) {
        throw NumericalError("diagonalize_chain: non-finite Hamiltonian entries");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> solver(m);
    if (solver.info() != Eigen::Success) {
        std::ostringstream os;
        os << "diagonalize_chain: eigensolver did not converge (dim " << m.rows()
           << ", max|H| " << m.cwiseAbs().maxCoeff() << ", |H|_F " << m.norm() << ")";
        throw NumericalError(os.str());
    }
    return {solver.eigenvalues(), solver.eigenvectors(), h.params};
}

std::vector<double> smoothed_level_density(const SystemSpectrum& spectrum,
                                           std::span<const double> grid, double eta) {
    if (!(eta > 0.0)) throw ParameterError("smoothed_level_density: eta must be > 0");
    std::vector<double> rho(grid.size(), 0.0);
    const double norm = eta / std::numbers::pi;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        double acc = 0.0;
        for (Eigen::Index m = 0; m < spectrum.energies.size(); ++m) {
            const double d = grid[g] - spectrum.energies[m];
            acc += norm / (d * d + eta * eta);
        }
        rho[g] = acc;
    }
    return rho;
}

double spectral_range_estimate(const ChainHamiltonian& h) {
    const double n = static_cast<double>(h.matrix.rows());
    return std::sqrt(h.matrix.squaredNorm() / n);
}

}  // namespace heatlab
