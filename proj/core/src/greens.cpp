#include "heatlab/greens.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "heatlab/errors.hpp"
#include "heatlab/fit.hpp"

namespace heatlab {

namespace {

constexpr Complex kI{0.0, 1.0};

double bulk_lambda(double lambda, double w) { return std::sqrt(lambda * lambda + 2.0 * w * w); }

// One Newton step on F_k = z G_k - 1 - (lambda^2 G_k + w^2 (G_{k-1} + G_{k+1})) G_k.
void newton_step(std::vector<Complex>& g, double lambda, double w, Complex z) {
    const int K = static_cast<int>(g.size());
    const double l2 = lambda * lambda;
    const double w2 = w * w;
    Eigen::MatrixXcd jac = Eigen::MatrixXcd::Zero(K, K);
    Eigen::VectorXcd f(K);
    for (int k = 0; k < K; ++k) {
        const Complex nb = (k > 0 ? g[k - 1] : 0.0) + (k + 1 < K ? g[k + 1] : 0.0);
        f[k] = z * g[k] - 1.0 - (l2 * g[k] + w2 * nb) * g[k];
        jac(k, k) = z - 2.0 * l2 * g[k] - w2 * nb;
        if (k > 0) jac(k, k - 1) = -w2 * g[k];
        if (k + 1 < K) jac(k, k + 1) = -w2 * g[k];
    }
    const Eigen::VectorXcd step = jac.partialPivLu().solve(f);
    for (int k = 0; k < K; ++k) g[k] -= step[k];
}

}  // namespace

double pastur_residual(std::span<const Complex> g, double lambda, double w, Complex z) {
    const auto K = g.size();
    double worst = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        const Complex nb = (k > 0 ? g[k - 1] : 0.0) + (k + 1 < K ? g[k + 1] : 0.0);
        const Complex r = z * g[k] - 1.0 - (lambda * lambda * g[k] + w * w * nb) * g[k];
        worst = std::max(worst, std::abs(r));
    }
    return worst;
}

std::vector<Complex> pastur_point(int K, double lambda, double w, Complex z, std::span<const Complex> guess,
                                  const PasturOptions& options, int* iterations, bool* polished) {
    if (K < 1) throw ParameterError("pastur: K must be >= 1");
    if (!(z.imag() > 0.0)) throw ParameterError("pastur: eta must be > 0");
    if (!guess.empty() && static_cast<int>(guess.size()) != K) throw ParameterError("pastur: guess size != K");

    std::vector<Complex> g(static_cast<std::size_t>(K));
    if (guess.empty()) {
        std::fill(g.begin(), g.end(), -kI / bulk_lambda(lambda, w));
    } else {
        std::copy(guess.begin(), guess.end(), g.begin());
    }

    const double l2 = lambda * lambda;
    const double w2 = w * w;
    const double d = options.damping;
    std::vector<Complex> next(g.size());
    int it = 0;
    bool converged = false;
    while (it < options.max_iterations) {
        ++it;
        double change = 0.0;
        for (int k = 0; k < K; ++k) {
            const Complex nb = (k > 0 ? g[k - 1] : 0.0) + (k + 1 < K ? g[k + 1] : 0.0);
            const Complex target = 1.0 / (z - l2 * g[k] - w2 * nb);
            next[k] = (1.0 - d) * g[k] + d * target;
            change = std::max(change, std::abs(next[k] - g[k]) / std::max(1.0, std::abs(g[k])));
        }
        g.swap(next);
        if (change <= options.tolerance) {
            converged = true;
            break;
        }
    }
    if (iterations) *iterations = it;
    if (polished) *polished = false;

    // The damped map contracts slowly near the band edges; finish with Newton
    // from the current (already retarded) iterate.
    if (!converged || pastur_residual(g, lambda, w, z) > options.residual_tolerance) {
        for (int s = 0; s < 50 && pastur_residual(g, lambda, w, z) > 0.1 * options.residual_tolerance; ++s) {
            newton_step(g, lambda, w, z);
        }
        if (polished) *polished = true;
    }

    const double res = pastur_residual(g, lambda, w, z);
    const bool retarded = std::all_of(g.begin(), g.end(), [](Complex x) { return x.imag() < 0.0; });
    if (!(res <= options.residual_tolerance) || !retarded) {
        std::ostringstream os;
        os << "pastur: no convergence at E = " << z.real() << " (eta = " << z.imag() << ", residual " << res
           << (retarded ? "" : ", non-retarded root") << ")";
        throw NumericalError(os.str());
    }
    return g;
}

GreenProfile pastur_solve(const ChainParams& params, std::span<const double> grid, double eta,
                          const PasturOptions& options) {
    params.validate();
    if (!(eta > 0.0)) throw ParameterError("pastur_solve: eta must be > 0");
    if (grid.empty()) throw ParameterError("pastur_solve: empty grid");
    const double lp = bulk_lambda(params.lambda, params.w);
    for (double e : grid) {
        if (!std::isfinite(e) || std::abs(e) > 3.0 * lp * (1.0 + 1e-12)) {
            throw ParameterError("pastur_solve: grid must lie within +-3 lambda'");
        }
    }

    GreenProfile out;
    out.grid.assign(grid.begin(), grid.end());
    out.eta = eta;
    out.params = params;
    const auto n = static_cast<Eigen::Index>(grid.size());
    out.g_blocks.resize(n, params.K);
    out.g_surface.resize(n);

    std::vector<Complex> prev;
    const double coupling = params.v * params.v * params.N;
    for (Eigen::Index i = 0; i < n; ++i) {
        const Complex z{grid[static_cast<std::size_t>(i)], eta};
        int iters = 0;
        bool polished = false;
        // Continuation from the previous grid point; the solution is unique in
        // the lower half-plane, so the seed only affects the iteration count.
        const auto g = pastur_point(params.K, params.lambda, params.w, z, prev, options, &iters, &polished);
        for (int k = 0; k < params.K; ++k) out.g_blocks(i, k) = g[static_cast<std::size_t>(k)];
        out.g_surface[i] = 1.0 / (z - params.E1 - coupling * g[0]);
        out.max_residual = std::max(out.max_residual, pastur_residual(g, params.lambda, params.w, z));
        out.max_iterations_used = std::max(out.max_iterations_used, iters);
        out.newton_polished += polished ? 1 : 0;
        prev = g;
    }
    return out;
}

Complex bulk_green(double lambda, double w, double E) {
    const double lp = bulk_lambda(lambda, w);
    const double x = E / (2.0 * lp);
    if (std::abs(x) <= 1.0) return Complex{x, -std::sqrt(1.0 - x * x)} / lp;
    // Decaying real root, continuous with the band edge value 1/lambda'.
    const double s = std::copysign(std::sqrt(x * x - 1.0), x);
    return Complex{(x - s) / lp, -0.0};
}

Complex bulk_green(double lambda, double w, Complex z) {
    if (!(z.imag() > 0.0)) throw ParameterError("bulk_green: Im z must be > 0");
    const double lp = bulk_lambda(lambda, w);
    const Complex root = std::sqrt(z * z - 4.0 * lp * lp);
    const Complex g1 = (z - root) / (2.0 * lp * lp);
    const Complex g2 = (z + root) / (2.0 * lp * lp);
    return g1.imag() < 0.0 ? g1 : g2;
}

StrengthFunction fitted_strength_function(std::vector<double> grid, std::vector<double> values, double eta) {
    if (grid.size() != values.size()) throw ParameterError("strength function: size mismatch");
    StrengthFunction sf;
    sf.grid = std::move(grid);
    sf.values = std::move(values);
    sf.eta = eta;
    sf.weight = trapezoid(sf.grid, sf.values);
    const LorentzianFit fit = fit_lorentzian(sf.grid, sf.values);
    sf.width = fit.half_width;
    sf.fwhm = 2.0 * fit.half_width;
    sf.center = fit.center;
    return sf;
}

StrengthFunction strength_function_analytic(const GreenProfile& profile, double v, int N, double E1) {
    if (profile.g_blocks.rows() != static_cast<Eigen::Index>(profile.grid.size())) {
        throw ParameterError("strength_function_analytic: profile not solved");
    }
    if (N < 1) throw ParameterError("strength_function_analytic: N must be >= 1");
    std::vector<double> values(profile.grid.size());
    const double coupling = v * v * N;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const Complex z{profile.grid[i], profile.eta};
        const Complex g11 = 1.0 / (z - E1 - coupling * profile.g_blocks(static_cast<Eigen::Index>(i), 0));
        values[i] = -g11.imag() / std::numbers::pi;
    }
    return fitted_strength_function(profile.grid, std::move(values), profile.eta);
}

StrengthFunction strength_function_analytic(const GreenProfile& profile) {
    return strength_function_analytic(profile, profile.params.v, profile.params.N, profile.params.E1);
}

StrengthFunction strength_function_empirical(std::span<const SystemSpectrum> ensemble, int site,
                                             std::span<const double> grid, double eta) {
    if (ensemble.empty()) throw ParameterError("strength_function_empirical: empty ensemble");
    if (!(eta > 0.0)) throw ParameterError("strength_function_empirical: eta must be > 0");
    if (grid.empty()) throw ParameterError("strength_function_empirical: empty grid");
    if (ensemble.size() < 10) warn("strength_function_empirical: fewer than 10 realizations");

    std::vector<double> values(grid.size(), 0.0);
    if (eta < ensemble.front().params.mean_level_spacing()) {
        warn("strength_function_empirical: eta below the mean level spacing");
    }
    const double inv = 1.0 / static_cast<double>(ensemble.size());
    for (const SystemSpectrum& s : ensemble) {
        if (site < 0 || site >= s.size()) throw ParameterError("strength_function_empirical: site out of range");
        const Vector weights = s.modes.row(site).array().square().transpose();
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const Eigen::ArrayXd d = s.energies.array() - grid[i];
            values[i] += inv * (weights.array() * (eta / std::numbers::pi) / (d.square() + eta * eta)).sum();
        }
    }
    return fitted_strength_function({grid.begin(), grid.end()}, std::move(values), eta);
}

std::vector<double> average_level_density(const GreenProfile& profile, int N) {
    if (N < 1) throw ParameterError("average_level_density: N must be >= 1");
    std::vector<double> rho(profile.grid.size());
    for (std::size_t i = 0; i < rho.size(); ++i) {
        rho[i] = -static_cast<double>(N) / std::numbers::pi *
                 profile.g_blocks.row(static_cast<Eigen::Index>(i)).sum().imag();
    }
    return rho;
}

}  // namespace heatlab
