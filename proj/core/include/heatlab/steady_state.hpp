#pragma once

// Stationary solutions of the two-bath master equation
//   sum_m (W1_nm + W2_nm) P_m = (sum_m (W1_mn + W2_mn)) P_n
// exactly (null vector of the rate generator) and to first order in
// dT = (T2 - T1) / 2 around a reference temperature T0 = alpha T1 + (1 - alpha) T2.

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "heatlab/bath.hpp"

namespace heatlab {

enum class CouplingTag { Equal, Similar, Dissimilar };

struct CouplingClass {
    CouplingTag tag = CouplingTag::Equal;
    double ratio = 1.0;         ///< least-squares a in X1 ~ a X2
    double fit_residual = 0.0;  ///< |X1 - a X2|_F / |X1|_F
};

enum class SolveMethod { Exact, Perturbative };

struct SteadyState {
    Vector p;
    Vector delta_p;
    double t0 = 0.0;     ///< unset (NaN) for exact solutions
    double alpha = 0.0;  ///< unset (NaN) for exact solutions
    CouplingClass klass;
    SolveMethod method = SolveMethod::Exact;
    std::vector<std::string> warnings;
};

struct ExactSolveOptions {
    double null_tolerance = 1e-10;  ///< sigma_min / sigma_max must fall below this
    double gap_tolerance = 1e-6;    ///< second-smallest sigma / sigma_max must exceed this
};

/// Generator L with (L P)_n = sum_m W_nm P_m - (sum_m W_mn) P_n for W = W1 + W2.
Matrix rate_generator(const RateMatrix& w1, const RateMatrix& w2);

/// Throws StructuralError for a reducible rate graph, DegeneracyError when the
/// null space is not one-dimensional.
SteadyState stationary_exact(const RateMatrix& w1, const RateMatrix& w2,
                             const ExactSolveOptions& options = {});

/// Gibbs distribution exp(-E_n / T) / Z.
Vector gibbs(const Vector& energies, double temperature);

CouplingClass classify_couplings(const Matrix& x1, const Matrix& x2, double class_tol = 1e-8);

/// Eigen-decomposition of B~ = B - diag(rowsum B), B = B1 + B2. The zero mode
/// (uniform eigenvector) is stored first; the remaining eigenvalues are negative.
struct RelaxationSpectrum {
    Vector eigenvalues;
    Matrix modes;  ///< column k is the k-th eigenvector
};

RelaxationSpectrum relaxation_spectrum(const PerturbationObjects& pert1,
                                       const PerturbationObjects& pert2);

/// S_ij = sum_{k>=2} A~(i)_k A~(j)_k / lambda_k with A~ = O A.
struct BracketSums {
    double s11 = 0.0;
    double s12 = 0.0;
    double s22 = 0.0;
};

BracketSums bracket_sums(const PerturbationObjects& pert1, const PerturbationObjects& pert2);
BracketSums bracket_sums(const RelaxationSpectrum& relax, const Vector& a1, const Vector& a2);

/// The round bracket that multiplies the dP term of the bath-1 current:
/// alpha S12 - (1 - alpha) S11.
double bath1_bracket(const BracketSums& s, double alpha) noexcept;
/// Its bath-2 counterpart: alpha S22 - (1 - alpha) S12.
double bath2_bracket(const BracketSums& s, double alpha) noexcept;

struct ReferencePoint {
    double t0 = 0.0;
    double alpha = 0.5;
    bool out_of_range = false;  ///< alpha outside [0, 1]
};

struct ReferenceTemperatures {
    ReferencePoint bath1;
    std::optional<ReferencePoint> bath2;  ///< only for Dissimilar couplings
    int iterations = 0;
};

/// Re-evaluates (B1, A1), (B2, A2) at a candidate T0.
using PerturbationProvider =
    std::function<std::pair<PerturbationObjects, PerturbationObjects>(double t0)>;

struct ReferenceOptions {
    double damping = 0.5;
    int max_iterations = 100;
    double tolerance = 1e-10;  ///< relative change of T0
};

ReferenceTemperatures reference_temperature(const CouplingClass& klass, double t1, double t2,
                                            const PerturbationProvider& provider,
                                            const ReferenceOptions& options = {});

/// dP solving [-2(1 - alpha) A1 + 2 alpha A2] dT + B~ dP = 0 with sum dP = 0.
Vector linearized_solve(const PerturbationObjects& pert1, const PerturbationObjects& pert2,
                        double alpha, double dT);
Vector linearized_solve(const RelaxationSpectrum& relax, const Vector& a1, const Vector& a2,
                        double alpha, double dT);

/// Normalized first-order occupations
/// P_m = g_m (1 + dP_m - sum_k g_k dP_k), g = Gibbs(T0).
Vector occupation_probabilities(const Vector& energies, double t0, const Vector& delta_p);

}  // namespace heatlab
