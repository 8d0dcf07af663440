#include "heatlab/transport.hpp"

#include <cmath>
#include <sstream>

#include "heatlab/errors.hpp"
#include "heatlab/fit.hpp"

namespace heatlab {

namespace {

// sum_n E_n [(W P)_n - (sum_m W_mn) P_n], the net energy gain from one bath.
double energy_inflow(const Vector& energies, const Matrix& w, const Vector& p) {
    const Eigen::Index M = energies.size();
    if (w.rows() != M || w.cols() != M || p.size() != M) {
        throw ParameterError("heat current: dimension mismatch");
    }
    const Vector gain = w * p;
    const Vector loss = w.colwise().sum().transpose().cwiseProduct(p);
    return energies.dot(gain - loss);
}

}  // namespace

double heat_current_exact(const Vector& energies, const RateMatrix& w2, const Vector& p) {
    return energy_inflow(energies, w2.w, p);
}

double bath1_outflow(const Vector& energies, const RateMatrix& w1, const Vector& p) {
    return -energy_inflow(energies, w1.w, p);
}

GreenKuboTerms green_kubo_terms(const Vector& energies, const Matrix& x, double t0) {
    if (!(t0 > 0.0)) throw ParameterError("green_kubo: t0 must be > 0");
    const Eigen::Index M = energies.size();
    if (x.rows() != M || x.cols() != M) throw ParameterError("green_kubo: dimension mismatch");

    // Accumulate with energies measured from E_min; the factor cancels in the ratio.
    const double beta0 = 1.0 / t0;
    const double emin = M > 0 ? energies.minCoeff() : 0.0;
    const Vector half = ((energies.array() - emin) * (-0.5 * beta0)).exp();

    GreenKuboTerms t;
    t.partition = half.squaredNorm();
    for (Eigen::Index m = 0; m < M; ++m) {
        for (Eigen::Index n = 0; n < M; ++n) {
            const double d = energies[m] - energies[n];
            t.numerator += d * d * half[m] * half[n] * x(m, n);
        }
    }
    // Restore the unshifted sums unless that would overflow.
    const double shift = std::exp(-beta0 * emin);
    if (std::isfinite(shift * t.partition) && std::isfinite(shift * t.numerator) && shift > 0.0) {
        t.numerator *= shift;
        t.partition *= shift;
    }
    return t;
}

double equilibrium_conductance(const GreenKuboTerms& terms, double t0, double gamma) noexcept {
    return gamma / (t0 * t0) * terms.numerator / terms.partition;
}

double conductance_green_kubo(const Vector& energies, const Matrix& x, double t0, double gamma) {
    if (!(gamma > 0.0)) throw ParameterError("conductance_green_kubo: gamma must be > 0");
    return equilibrium_conductance(green_kubo_terms(energies, x, t0), t0, gamma);
}

TransportResult conductance_linear_response(const Vector& energies, const CouplingKernel& x1,
                                            const CouplingKernel& x2, double t1, double t2,
                                            const LinearResponseOptions& options) {
    if (!(t1 > 0.0) || !(t2 > t1)) throw ParameterError("conductance_linear_response: need 0 < t1 < t2");

    TransportResult r;
    r.klass = classify_couplings(x1.x, x2.x, options.class_tol);
    r.delta_t = 0.5 * (t2 - t1);

    const PerturbationProvider provider = [&](double t0) {
        return std::pair{perturbation_objects(x1.x, t0, energies), perturbation_objects(x2.x, t0, energies)};
    };
    const ReferenceTemperatures ref = reference_temperature(r.klass, t1, t2, provider, options.reference);
    r.t0 = ref.bath1.t0;
    r.alpha = ref.bath1.alpha;
    r.alpha_out_of_range = ref.bath1.out_of_range;

    GreenKuboTerms form1;
    GreenKuboTerms form2;
    double gamma2 = 0.0;
    switch (r.klass.tag) {
        case CouplingTag::Equal:
            r.gamma = 0.5;
            gamma2 = 0.5;
            r.t0_2 = r.t0;
            r.alpha_2 = r.alpha;
            form1 = green_kubo_terms(energies, x1.x, r.t0);
            form2 = green_kubo_terms(energies, x2.x, r.t0);
            break;
        case CouplingTag::Similar: {
            const double a = r.klass.ratio;
            r.gamma = 1.0 / (1.0 + a);
            gamma2 = a / (1.0 + a);
            r.t0_2 = r.t0;
            r.alpha_2 = r.alpha;
            form1 = green_kubo_terms(energies, x1.x, r.t0);
            form2 = green_kubo_terms(energies, x2.x, r.t0);
            break;
        }
        case CouplingTag::Dissimilar:
            r.gamma = 1.0 - r.alpha;
            r.t0_2 = ref.bath2->t0;
            r.alpha_2 = ref.bath2->alpha;
            r.alpha_out_of_range = r.alpha_out_of_range || ref.bath2->out_of_range;
            gamma2 = r.alpha_2;
            form1 = green_kubo_terms(energies, x1.x, r.t0);
            form2 = green_kubo_terms(energies, x2.x, r.t0_2);
            break;
    }

    r.numerator = form1.numerator;
    r.partition = form1.partition;
    r.conductance_1 = equilibrium_conductance(form1, r.t0, r.gamma);
    r.conductance_2 = equilibrium_conductance(form2, r.t0_2, gamma2);
    const double mean = 0.5 * (r.conductance_1 + r.conductance_2);
    r.form_spread = mean != 0.0 ? std::abs(r.conductance_1 - r.conductance_2) / std::abs(mean) : 0.0;

    if (r.klass.tag == CouplingTag::Dissimilar) {
        r.conductance = mean;
    } else {
        r.conductance = r.conductance_1;
        // The two forms differ only through X1 - a X2.
        const double allowed = 1e-12 + 4.0 * r.klass.fit_residual;
        if (r.form_spread > allowed) {
            std::ostringstream os;
            os << "conductance_linear_response: the two forms disagree by " << r.form_spread
               << " (allowed " << allowed << ")";
            throw NumericalError(os.str());
        }
    }
    r.current = r.conductance * r.delta_t;

    if (r.alpha_out_of_range) r.warnings.emplace_back("mixing parameter alpha outside [0, 1]");
    if (r.klass.tag == CouplingTag::Dissimilar && std::abs(r.t0 - r.t0_2) > 1e-3 * r.t0) {
        std::ostringstream os;
        os << "reference temperatures of the two baths differ: " << r.t0 << " vs " << r.t0_2;
        r.warnings.push_back(os.str());
    }
    return r;
}

TransportResult conductance_linear_response(const SystemSpectrum& spectrum, const CouplingKernel& x1,
                                            const CouplingKernel& x2, double t1, double t2,
                                            const LinearResponseOptions& options) {
    return conductance_linear_response(spectrum.energies, x1, x2, t1, t2, options);
}

LinearityFit fourier_linearity_fit(std::span<const double> delta_t, std::span<const double> currents) {
    if (delta_t.size() != currents.size()) throw ParameterError("fourier_linearity_fit: size mismatch");
    if (delta_t.size() < 4) throw ParameterError("fourier_linearity_fit: need at least 4 points");

    const auto n = static_cast<Eigen::Index>(delta_t.size());
    Eigen::MatrixXd design(n, 2);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double d = delta_t[static_cast<std::size_t>(i)];
        design(i, 0) = d;
        design(i, 1) = d * d;
        y[i] = currents[static_cast<std::size_t>(i)];
    }
    const Eigen::VectorXd c = least_squares(design, y);
    return {c[0], c[1], std::sqrt((y - design * c).squaredNorm() / static_cast<double>(n))};
}

}  // namespace heatlab
