#include "heatlab/steady_state.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "heatlab/errors.hpp"

namespace heatlab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_same_shape(const Matrix& a, const Matrix& b, const char* where) {
    if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows()) {
        throw ParameterError(std::string(where) + ": matrices must be square with equal dimensions");
    }
}

struct SpanningTree {
    std::vector<Eigen::Index> parent;  // -1 for the root
    std::vector<Eigen::Index> order;   // BFS visiting order
    bool connected = false;
};

// Breadth-first search over the undirected graph of nonzero rates.
SpanningTree spanning_tree(const Matrix& w) {
    const Eigen::Index M = w.rows();
    SpanningTree tree;
    tree.parent.assign(static_cast<std::size_t>(M), -2);
    tree.order.reserve(static_cast<std::size_t>(M));
    tree.parent[0] = -1;
    tree.order.push_back(0);
    for (std::size_t head = 0; head < tree.order.size(); ++head) {
        const Eigen::Index m = tree.order[head];
        for (Eigen::Index n = 0; n < M; ++n) {
            if (tree.parent[static_cast<std::size_t>(n)] != -2) continue;
            if (w(n, m) > 0.0 || w(m, n) > 0.0) {
                tree.parent[static_cast<std::size_t>(n)] = m;
                tree.order.push_back(n);
            }
        }
    }
    tree.connected = static_cast<Eigen::Index>(tree.order.size()) == M;
    return tree;
}

// Detailed-balance weights along the spanning tree, or nullopt when the
// combined rates are not detailed-balanced with respect to any distribution.
std::optional<Vector> balance_weights(const Matrix& w, const SpanningTree& tree) {
    const Eigen::Index M = w.rows();
    Vector logg = Vector::Constant(M, kNaN);
    logg[0] = 0.0;
    // Parents precede children in BFS order.
    for (std::size_t i = 1; i < tree.order.size(); ++i) {
        const Eigen::Index n = tree.order[i];
        const Eigen::Index m = tree.parent[static_cast<std::size_t>(n)];
        if (!(w(n, m) > 0.0 && w(m, n) > 0.0)) return std::nullopt;
        // W_nm g_m = W_mn g_n
        logg[n] = logg[m] + std::log(w(n, m)) - std::log(w(m, n));
    }
    const double shift = logg.maxCoeff();
    Vector g = (logg.array() - shift).exp();
    for (Eigen::Index n = 0; n < M; ++n) {
        for (Eigen::Index m = n + 1; m < M; ++m) {
            const double lhs = w(n, m) * g[m];
            const double rhs = w(m, n) * g[n];
            if (std::abs(lhs - rhs) > 1e-12 * std::max(std::abs(lhs), std::abs(rhs))) return std::nullopt;
        }
    }
    return g;
}

}  // namespace

Matrix rate_generator(const RateMatrix& w1, const RateMatrix& w2) {
    check_same_shape(w1.w, w2.w, "rate_generator");
    Matrix l = w1.w + w2.w;
    l.diagonal().setZero();
    const Vector out = l.colwise().sum().transpose();
    l.diagonal() = -out;
    return l;
}

SteadyState stationary_exact(const RateMatrix& w1, const RateMatrix& w2,
                             const ExactSolveOptions& options) {
    check_same_shape(w1.w, w2.w, "stationary_exact");
    const Eigen::Index M = w1.w.rows();
    if (M < 2) throw ParameterError("stationary_exact: need at least two levels");

    Matrix total = w1.w + w2.w;
    total.diagonal().setZero();
    const auto tree = spanning_tree(total);
    if (!tree.connected) {
        throw StructuralError("stationary_exact: rate graph is reducible (system splits into uncoupled parts)");
    }

    const Matrix l = rate_generator(w1, w2);
    const double lmax = l.cwiseAbs().maxCoeff();
    Vector p;

    if (auto g = balance_weights(total, tree)) {
        // Similarity transform D^-1/2 L D^1/2 is symmetric when the total rates
        // obey detailed balance; its null vector is sqrt(g).
        const Vector sq = g->cwiseSqrt();
        Matrix s = sq.cwiseInverse().asDiagonal() * l * sq.asDiagonal();
        s = 0.5 * (s + s.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<Matrix> eig(s);
        if (eig.info() != Eigen::Success) throw NumericalError("stationary_exact: symmetric eigensolve failed");
        const Vector& ev = eig.eigenvalues();
        const double scale = ev.cwiseAbs().maxCoeff();
        if (std::abs(ev[M - 1]) > options.null_tolerance * scale || -ev[M - 2] < options.gap_tolerance * scale) {
            throw DegeneracyError("stationary_exact: null space of the generator is not one-dimensional");
        }
        p = sq.cwiseProduct(eig.eigenvectors().col(M - 1));
    } else {
        Eigen::BDCSVD<Matrix> svd(l, Eigen::ComputeFullV);
        const Vector& sv = svd.singularValues();
        const double smax = sv[0];
        if (!(smax > 0.0)) throw DegeneracyError("stationary_exact: zero generator");
        if (sv[M - 1] > options.null_tolerance * smax) {
            std::ostringstream os;
            os << "stationary_exact: no null vector (sigma_min/sigma_max = " << sv[M - 1] / smax << ")";
            throw DegeneracyError(os.str());
        }
        if (sv[M - 2] < options.gap_tolerance * smax) {
            std::ostringstream os;
            os << "stationary_exact: null space dimension > 1 (sigma_2/sigma_max = " << sv[M - 2] / smax << ")";
            throw DegeneracyError(os.str());
        }
        p = svd.matrixV().col(M - 1);
    }

    p /= p.sum();
    if (p.minCoeff() < -1e-12) throw NumericalError("stationary_exact: null vector has mixed signs");
    p = p.cwiseMax(0.0);
    p /= p.sum();

    const double residual = (l * p).cwiseAbs().maxCoeff();
    if (residual > 1e-10 * lmax) {
        std::ostringstream os;
        os << "stationary_exact: residual " << residual << " exceeds 1e-10 |L|_max";
        throw NumericalError(os.str());
    }

    SteadyState out;
    out.p = std::move(p);
    out.delta_p = Vector::Zero(M);
    out.t0 = kNaN;
    out.alpha = kNaN;
    out.method = SolveMethod::Exact;
    return out;
}

Vector gibbs(const Vector& energies, double temperature) {
    if (!(temperature > 0.0)) throw ParameterError("gibbs: temperature must be > 0");
    const double emin = energies.minCoeff();
    Vector g = ((energies.array() - emin) * (-1.0 / temperature)).exp();
    return g / g.sum();
}

CouplingClass classify_couplings(const Matrix& x1, const Matrix& x2, double class_tol) {
    check_same_shape(x1, x2, "classify_couplings");
    const double n2 = x2.squaredNorm();
    const double n1 = x1.norm();
    if (!(n2 > 0.0)) throw PathologicalCouplingError("classify_couplings: X2 vanishes identically");
    if (!(n1 > 0.0)) throw PathologicalCouplingError("classify_couplings: X1 vanishes identically");

    CouplingClass c;
    c.ratio = x1.cwiseProduct(x2).sum() / n2;
    c.fit_residual = (x1 - c.ratio * x2).norm() / n1;
    if (c.fit_residual <= class_tol && std::abs(c.ratio - 1.0) <= class_tol) {
        c.tag = CouplingTag::Equal;
    } else if (c.fit_residual <= class_tol && c.ratio > 0.0) {
        c.tag = CouplingTag::Similar;
    } else {
        c.tag = CouplingTag::Dissimilar;
    }
    return c;
}

RelaxationSpectrum relaxation_spectrum(const PerturbationObjects& pert1,
                                       const PerturbationObjects& pert2) {
    check_same_shape(pert1.b, pert2.b, "relaxation_spectrum");
    const Eigen::Index M = pert1.b.rows();
    if (M < 2) throw ParameterError("relaxation_spectrum: need at least two levels");

    Matrix bt = pert1.b + pert2.b;
    const Vector rows = bt.rowwise().sum();
    bt.diagonal() -= rows;

    Eigen::SelfAdjointEigenSolver<Matrix> eig(bt);
    if (eig.info() != Eigen::Success) throw NumericalError("relaxation_spectrum: eigensolve failed");
    const Vector& ev = eig.eigenvalues();
    const double scale = ev.cwiseAbs().maxCoeff();
    if (!(scale > 0.0)) throw PathologicalCouplingError("relaxation_spectrum: B~ vanishes");

    const double tol = 1e-10 * scale;
    if (ev[M - 1] > tol) throw NumericalError("relaxation_spectrum: positive eigenvalue of B~");
    if (std::abs(ev[M - 1]) > tol) throw NumericalError("relaxation_spectrum: B~ has no zero mode");
    if (ev[M - 2] > -tol) {
        throw PathologicalCouplingError(
            "relaxation_spectrum: more than one vanishing eigenvalue (couplings too close to diagonal)");
    }
    const double overlap = std::abs(eig.eigenvectors().col(M - 1).sum()) / std::sqrt(static_cast<double>(M));
    if (overlap < 1.0 - 1e-8) throw NumericalError("relaxation_spectrum: zero mode is not uniform");

    RelaxationSpectrum out{Vector(M), Matrix(M, M)};
    out.eigenvalues[0] = ev[M - 1];
    out.modes.col(0) = eig.eigenvectors().col(M - 1);
    out.eigenvalues.tail(M - 1) = ev.head(M - 1);
    out.modes.rightCols(M - 1) = eig.eigenvectors().leftCols(M - 1);
    return out;
}

BracketSums bracket_sums(const RelaxationSpectrum& relax, const Vector& a1, const Vector& a2) {
    const Eigen::Index M = relax.eigenvalues.size();
    const auto rest = relax.modes.rightCols(M - 1);
    const Vector t1 = rest.transpose() * a1;
    const Vector t2 = rest.transpose() * a2;
    const Vector inv = relax.eigenvalues.tail(M - 1).cwiseInverse();
    return {t1.cwiseProduct(inv).dot(t1), t1.cwiseProduct(inv).dot(t2), t2.cwiseProduct(inv).dot(t2)};
}

BracketSums bracket_sums(const PerturbationObjects& pert1, const PerturbationObjects& pert2) {
    return bracket_sums(relaxation_spectrum(pert1, pert2), pert1.a, pert2.a);
}

double bath1_bracket(const BracketSums& s, double alpha) noexcept {
    return alpha * s.s12 - (1.0 - alpha) * s.s11;
}

double bath2_bracket(const BracketSums& s, double alpha) noexcept {
    return alpha * s.s22 - (1.0 - alpha) * s.s12;
}

namespace {

ReferencePoint make_point(double t0, double alpha) {
    ReferencePoint p{t0, alpha, alpha < 0.0 || alpha > 1.0};
    if (p.out_of_range) {
        std::ostringstream os;
        os << "mixing parameter alpha = " << alpha << " lies outside [0, 1]";
        warn(os.str());
    }
    return p;
}

// alpha at which the bath-`which` bracket vanishes for the sums S.
double vanishing_alpha(const BracketSums& s, int which) {
    const double num = which == 1 ? s.s11 : s.s12;
    const double den = which == 1 ? s.s11 + s.s12 : s.s12 + s.s22;
    const double scale = which == 1 ? std::abs(s.s11) + std::abs(s.s12) : std::abs(s.s12) + std::abs(s.s22);
    if (!(std::abs(den) > 1e-14 * scale)) {
        throw PathologicalCouplingError("reference_temperature: S11 + S12 vanishes");
    }
    return num / den;
}

ReferencePoint self_consistent_point(int which, double t1, double t2, const PerturbationProvider& provider,
                                     const ReferenceOptions& options, int& iterations) {
    double t0 = 0.5 * (t1 + t2);
    for (int it = 1; it <= options.max_iterations; ++it) {
        const auto [p1, p2] = provider(t0);
        const double alpha = vanishing_alpha(bracket_sums(p1, p2), which);
        const double target = alpha * t1 + (1.0 - alpha) * t2;
        iterations = std::max(iterations, it);
        if (std::abs(target - t0) <= options.tolerance * t0) {
            // alpha belongs to the sums evaluated at t0, so the bracket vanishes there.
            return make_point(t0, alpha);
        }
        t0 += options.damping * (target - t0);
        if (!(t0 > 0.0)) throw NumericalError("reference_temperature: T0 left the positive axis");
    }
    std::ostringstream os;
    os << "reference_temperature: no convergence for bath " << which << " after " << options.max_iterations
       << " iterations";
    throw NumericalError(os.str());
}

}  // namespace

ReferenceTemperatures reference_temperature(const CouplingClass& klass, double t1, double t2,
                                            const PerturbationProvider& provider,
                                            const ReferenceOptions& options) {
    if (!(t1 > 0.0) || !(t2 >= t1)) throw ParameterError("reference_temperature: need 0 < t1 <= t2");

    ReferenceTemperatures out;
    switch (klass.tag) {
        case CouplingTag::Equal:
            out.bath1 = make_point(0.5 * (t1 + t2), 0.5);
            break;
        case CouplingTag::Similar: {
            const double a = klass.ratio;
            out.bath1 = make_point((a * t1 + t2) / (1.0 + a), a / (1.0 + a));
            break;
        }
        case CouplingTag::Dissimilar:
            out.bath1 = self_consistent_point(1, t1, t2, provider, options, out.iterations);
            out.bath2 = self_consistent_point(2, t1, t2, provider, options, out.iterations);
            break;
    }
    return out;
}

Vector linearized_solve(const RelaxationSpectrum& relax, const Vector& a1, const Vector& a2, double alpha,
                        double dT) {
    const Eigen::Index M = relax.eigenvalues.size();
    if (a1.size() != M || a2.size() != M) throw ParameterError("linearized_solve: dimension mismatch");
    const Vector c = -2.0 * (1.0 - alpha) * a1 + 2.0 * alpha * a2;
    const auto rest = relax.modes.rightCols(M - 1);
    const Vector coeff = (rest.transpose() * c).cwiseQuotient(relax.eigenvalues.tail(M - 1));
    Vector dp = -dT * (rest * coeff);
    dp.array() -= dp.mean();
    return dp;
}

Vector linearized_solve(const PerturbationObjects& pert1, const PerturbationObjects& pert2, double alpha,
                        double dT) {
    if (std::abs(pert1.t0 - pert2.t0) > 1e-14 * std::max(pert1.t0, pert2.t0)) {
        throw ParameterError("linearized_solve: perturbation objects built at different T0");
    }
    return linearized_solve(relaxation_spectrum(pert1, pert2), pert1.a, pert2.a, alpha, dT);
}

Vector occupation_probabilities(const Vector& energies, double t0, const Vector& delta_p) {
    if (energies.size() != delta_p.size()) throw ParameterError("occupation_probabilities: dimension mismatch");
    if (delta_p.size() > 0 && delta_p.cwiseAbs().maxCoeff() > 0.5) {
        warn("occupation_probabilities: max |dP| > 0.5, first-order expansion is unreliable");
    }
    const Vector g = gibbs(energies, t0);
    const double mean = g.dot(delta_p);
    return g.array() * (1.0 + delta_p.array() - mean);
}

}  // namespace heatlab
