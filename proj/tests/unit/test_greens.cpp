#include <doctest.h>

#include <cmath>
#include <numbers>

#include "heatlab/errors.hpp"
#include "heatlab/fit.hpp"
#include "heatlab/greens.hpp"

using namespace heatlab;

namespace {

ChainParams chain(int K, double lambda, double w, double v = 0.05, int N = 200) {
    ChainParams p;
    p.K = K;
    p.N = N;
    p.lambda = lambda;
    p.w = w;
    p.v = v;
    return p;
}

std::vector<SystemSpectrum> ensemble(const ChainParams& p, int R, std::uint64_t seed) {
    std::vector<SystemSpectrum> out;
    for (int r = 0; r < R; ++r) {
        RngStream rng(derive_seed(seed, {static_cast<std::uint64_t>(r)}));
        out.push_back(diagonalize_chain(sample_chain_hamiltonian(p, rng)));
    }
    return out;
}

}  // namespace

TEST_CASE("single block at band center") {
    const auto g = pastur_point(1, 1.0, 0.0, {0.0, 1e-9});
    CHECK(std::abs(g[0] - Complex(0.0, -1.0)) <= 1e-6);
}

TEST_CASE("two blocks: lambda'^2 = lambda^2 + w^2") {
    const auto g = pastur_point(2, 1.0, 1.0, {0.0, 1e-9});
    const Complex expect(0.0, -1.0 / std::sqrt(2.0));
    CHECK(std::abs(g[0] - expect) <= 1e-6);
    CHECK(std::abs(g[1] - expect) <= 1e-6);
}

TEST_CASE("eight blocks: middle blocks approach the bulk value") {
    const auto g = pastur_point(8, 1.0, 1.0, {0.0, 1e-6});
    const Complex bulk(0.0, -1.0 / std::sqrt(3.0));
    for (int k = 2; k <= 5; ++k) CHECK(std::abs(g[k] - bulk) <= 0.05 * std::abs(bulk));
    // Edge blocks have one neighbour, so |G| is larger there and the
    // effective 1/|G| lies between lambda and sqrt(lambda^2 + w^2).
    CHECK(std::abs(g[0].imag()) >= std::abs(g[4].imag()));
    const double lp_edge = 1.0 / std::abs(g[0]);
    CHECK(lp_edge >= 1.0);
    CHECK(lp_edge <= std::sqrt(2.0));
}

TEST_CASE("bulk closed form") {
    CHECK(std::abs(bulk_green(1.0, 1.0, 0.0) - Complex(0.0, -1.0 / std::sqrt(3.0))) <= 1e-15);
    const double lp = std::sqrt(3.0);
    CHECK(std::abs(bulk_green(1.0, 1.0, 2.0 * lp) - Complex(1.0 / lp, 0.0)) <= 1e-12);
    // Outside the band: real, decaying, continuous at the edge.
    const Complex out = bulk_green(1.0, 1.0, 2.0 * lp + 1e-8);
    CHECK(out.imag() == 0.0);
    CHECK(std::abs(out.real() - 1.0 / lp) <= 1e-3);
    CHECK(std::abs(bulk_green(1.0, 1.0, 100.0).real() - 0.01) <= 1e-4);
    CHECK(bulk_green(1.0, 1.0, -2.0 * lp - 1.0).real() < 0.0);

    // w = 0: semicircle of radius 2 lambda.
    for (double e : {-1.5, -0.3, 0.0, 0.8, 1.9}) {
        const double rho = -bulk_green(1.0, 0.0, e).imag() / std::numbers::pi;
        CHECK(rho == doctest::Approx(std::sqrt(4.0 - e * e) / (2.0 * std::numbers::pi)).epsilon(1e-12));
    }
    // Complex argument agrees with the real-axis form as eta -> 0 and stays retarded.
    for (double e : {-4.0, -1.0, 0.5, 3.9}) {
        const Complex gz = bulk_green(1.0, 1.0, Complex(e, 1e-10));
        CHECK(std::abs(gz - bulk_green(1.0, 1.0, e)) <= 1e-6);
        CHECK(gz.imag() < 0.0);
    }
}

TEST_CASE("Pastur profile invariants") {
    const ChainParams p = chain(4, 1.0, 0.5);
    const double lp = p.bulk_lambda();
    const auto grid = linspace(-3.0 * lp, 3.0 * lp, 241);
    const GreenProfile prof = pastur_solve(p, grid, 0.02 * lp);
    CHECK(prof.max_residual <= 1e-10);
    CHECK((prof.g_blocks.imag().array() < 0.0).all());
    CHECK((prof.g_surface.imag().array() < 0.0).all());
    const auto n = static_cast<Eigen::Index>(grid.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        for (int k = 0; k < p.K; ++k) {
            const Complex a = prof.g_blocks(i, k);
            const Complex b = prof.g_blocks(n - 1 - i, k);
            CHECK(std::abs(a + std::conj(b)) <= 1e-9);
        }
        std::vector<Complex> g(static_cast<std::size_t>(p.K));
        for (int k = 0; k < p.K; ++k) g[static_cast<std::size_t>(k)] = prof.g_blocks(i, k);
        CHECK(pastur_residual(g, p.lambda, p.w, {grid[static_cast<std::size_t>(i)], prof.eta}) <= 1e-10);
    }
    const Eigen::Index mid = n / 2;
    CHECK(std::abs(prof.g_blocks(mid, 0).imag()) >= std::abs(prof.g_blocks(mid, 1).imag()));
}

TEST_CASE("Pastur input checks") {
    const ChainParams p = chain(2, 1.0, 0.5);
    const std::vector<double> grid{0.0};
    CHECK_THROWS_AS(pastur_solve(p, grid, 0.0), ParameterError);
    const std::vector<double> wide{10.0};
    CHECK_THROWS_AS(pastur_solve(p, wide, 0.01), ParameterError);
    CHECK_THROWS_AS(pastur_point(0, 1.0, 0.5, {0.0, 0.1}), ParameterError);
}

TEST_CASE("average level density") {
    const ChainParams p4 = chain(4, 1.0, 0.5, 0.05, 100);
    const double lp = p4.bulk_lambda();
    const double eta = 0.02 * lp;
    const auto grid = linspace(-3.0 * lp, 3.0 * lp, 1201);
    const auto rho4 = average_level_density(pastur_solve(p4, grid, eta), 100);
    CHECK(trapezoid(grid, rho4) == doctest::Approx(400.0).epsilon(0.03));

    const std::vector<double> zero{0.0};
    const double r4 = average_level_density(pastur_solve(p4, zero, eta), 100)[0];
    const double r8 = average_level_density(pastur_solve(chain(8, 1.0, 0.5, 0.05, 100), zero, eta), 100)[0];
    CHECK(r8 / r4 == doctest::Approx(2.0).epsilon(0.03));
}

TEST_CASE("level density: Pastur vs Monte Carlo") {
    const ChainParams p = chain(2, 1.0, 0.5, 0.05, 100);
    const double lp = p.bulk_lambda();
    const double eta = 2.0 * p.mean_level_spacing();
    const auto grid = linspace(-1.5 * lp, 1.5 * lp, 121);
    const auto rho_p = average_level_density(pastur_solve(p, grid, eta), p.N);
    const auto ens = ensemble(p, 20, 77);
    std::vector<double> rho_mc(grid.size(), 0.0);
    for (const auto& s : ens) {
        const auto r = smoothed_level_density(s, grid, eta);
        for (std::size_t i = 0; i < grid.size(); ++i) rho_mc[i] += r[i] / 20.0;
    }
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        num += (rho_mc[i] - rho_p[i]) * (rho_mc[i] - rho_p[i]);
        den += rho_p[i] * rho_p[i];
    }
    CHECK(std::sqrt(num / den) <= 0.05);
}

TEST_CASE("analytic strength function") {
    SUBCASE("peak value for v^2 N = 0.5, lambda' = 1") {
        ChainParams p = chain(1, 1.0, 0.0, 0.05, 200);
        const std::vector<double> grid = linspace(-3.0, 3.0, 601);
        const GreenProfile prof = pastur_solve(p, grid, 1e-6);
        const StrengthFunction sf = strength_function_analytic(prof, 0.05, 200, 0.0);
        CHECK(sf.values[300] == doctest::Approx(1.0 / (std::numbers::pi * 0.5)).epsilon(1e-5));
        CHECK(std::abs(sf.center) <= 1e-9);
        for (double v : sf.values) CHECK(v >= 0.0);
    }
    SUBCASE("constant-G Lorentzian has half-width v^2 N / lambda'") {
        GreenProfile prof;
        prof.grid = linspace(-6.0, 6.0, 1201);
        prof.eta = 1e-6;
        prof.params = chain(1, 1.0, 0.0, 0.05, 200);
        prof.g_blocks = Eigen::MatrixXcd::Constant(1201, 1, Complex(0.0, -1.0));
        const StrengthFunction sf = strength_function_analytic(prof, 0.05, 200, 0.0);
        CHECK(sf.width == doctest::Approx(0.5).epsilon(1e-4));
        CHECK(sf.fwhm == doctest::Approx(1.0).epsilon(1e-4));
    }
    SUBCASE("decoupled surface state is an eta peak at E1") {
        ChainParams p = chain(2, 1.0, 0.5, 0.0, 200);
        p.E1 = 0.3;
        const double lp = p.bulk_lambda();
        const auto grid = linspace(-3.0 * lp, 3.0 * lp, 2001);
        const StrengthFunction sf = strength_function_analytic(pastur_solve(p, grid, 0.02));
        CHECK(sf.center == doctest::Approx(0.3).epsilon(1e-6));
        CHECK(sf.width == doctest::Approx(0.02).epsilon(1e-3));
        CHECK(sf.weight == doctest::Approx(1.0).epsilon(0.02));
    }
    SUBCASE("width does not depend on the chain length") {
        std::vector<double> widths;
        for (int K : {2, 4, 8}) {
            const ChainParams p = chain(K, 1.0, 0.5, 0.05, 200);
            const double lp = p.bulk_lambda();
            const auto grid = linspace(-2.5 * lp, 2.5 * lp, 401);
            widths.push_back(strength_function_analytic(pastur_solve(p, grid, 0.02 * lp)).width);
        }
        const auto [lo, hi] = std::minmax_element(widths.begin(), widths.end());
        CHECK((*hi - *lo) / *lo <= 0.10);
    }
    SUBCASE("peak outside the grid") {
        ChainParams p = chain(2, 1.0, 0.5, 0.0, 200);
        p.E1 = 2.0;
        const auto grid = linspace(-1.0, 1.0, 101);
        CHECK_THROWS_AS(strength_function_analytic(pastur_solve(p, grid, 0.02)), FitError);
    }
}

TEST_CASE("empirical strength function") {
    SUBCASE("completeness of the eigenbasis") {
        const auto ens = ensemble(chain(2, 1.0, 0.5, 0.05, 50), 3, 5);
        for (const auto& s : ens) CHECK(std::abs(s.modes.row(0).squaredNorm() - 1.0) <= 1e-10);
    }
    SUBCASE("decoupled surface") {
        const ChainParams p = chain(2, 1.0, 0.5, 0.0, 50);
        const double lp = p.bulk_lambda();
        const auto grid = linspace(-3.0 * lp, 3.0 * lp, 2001);
        const auto ens = ensemble(p, 10, 6);
        const StrengthFunction sf = strength_function_empirical(ens, 0, grid, 0.02);
        CHECK(sf.weight == doctest::Approx(1.0).epsilon(0.02));
        CHECK(std::abs(sf.center) <= 1e-6);
        CHECK(sf.width == doctest::Approx(0.02).epsilon(1e-3));
    }
    SUBCASE("Monte Carlo width against the Pastur width") {
        const ChainParams p = chain(4, 1.0, 0.5, 0.05, 200);
        const double lp = p.bulk_lambda();
        const auto grid = linspace(-2.5 * lp, 2.5 * lp, 401);
        const double eta = 0.02 * lp;
        const StrengthFunction mc = strength_function_empirical(ensemble(p, 20, 9), 0, grid, eta);
        const StrengthFunction an = strength_function_analytic(pastur_solve(p, grid, eta));
        CHECK(mc.width == doctest::Approx(an.width).epsilon(0.15));
    }
    SUBCASE("errors") {
        const std::vector<SystemSpectrum> none;
        const std::vector<double> grid{0.0, 0.1, 0.2};
        CHECK_THROWS_AS(strength_function_empirical(none, 0, grid, 0.1), ParameterError);
    }
}
