#pragma once

// Experiment drivers turning the estimates into measured quantities:
// off-diagonal decay orders, square-function ratios, low/high-frequency
// splits, Hodge/Kato/Riesz/Sobolev experiments, Schur uniformity,
// factorisation and tent-space laws, and the dense small-grid oracle.

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "hodgelab/funcalc.hpp"
#include "hodgelab/tent.hpp"

namespace hodgelab {

class ProbeError : public Error {
 public:
  explicit ProbeError(const std::string& what) : Error("probes", what) {}
};

// --- operators --------------------------------------------------------------------------

struct OperatorSpec {
  std::string builtin = "dirac1d";  // dirac1d | elliptic-n | forms-n | da-n
  int m = 64;
  double period = 1.0;
  double amplitude = 0.0;  // sup ||B - I|| of the random part; 0 keeps B = I
  Roughness roughness = Roughness::smooth;
  int band = 4;            // band of smooth coefficients (grid independent)
  double phase = 0.0;      // coefficients multiplied by e^{i phase}
  double a_amplitude = 0.0;  // elliptic-n only: perturbation of the scalar a
  std::uint64_t seed = 0;
};

/// Builds the operator and runs the structural audits (nilpotency, coercivity,
/// ellipticity for elliptic-n); accretivity is audited separately.
std::shared_ptr<const PerturbedDirac> build_operator(const OperatorSpec& spec);

/// Accretivity and structural audits of a perturbed operator (trivial when B = I).
/// Throws AuditError("accretivity") or AuditError("nilpotency").
AccretivityReport audit_operator(const PerturbedDirac& op, int trials, std::uint64_t seed);

struct CatalogEntry {
  std::string name;
  std::string summary;
};
std::vector<CatalogEntry> builtin_operators();
std::string describe_builtin(const std::string& name);
/// Space dimension n of a builtin name; throws for unknown names.
int builtin_dimension(const std::string& name);
std::vector<CatalogEntry> experiment_catalog();
std::string describe_experiment(const std::string& name);

// --- ratio reports ---------------------------------------------------------------------

struct TrialRecord {
  std::size_t trial = 0;
  double numerator = 0.0;
  double denominator = 0.0;
  double ratio = 0.0;
};

struct RatioReport {
  std::string quantity;
  std::vector<TrialRecord> trials;
  std::size_t degenerate = 0;  // trials with a zero denominator, excluded
  double c = 0.0;              // min ratio
  double C = 0.0;              // max ratio
  double spread = 0.0;         // C / c
  bool stable = true;          // refinement flag (set by compare_refinement)
  double drift = 0.0;
};
RatioReport summarize(std::string quantity, std::vector<TrialRecord> trials);
/// Max relative change of c and C between two runs; sets drift/stable on `fine`.
double compare_refinement(const RatioReport& coarse, RatioReport& fine, double tol);

struct TrialOptions {
  int trials = 8;
  std::uint64_t seed = 0;
  int workers = 1;
  int band = 4;  // band of random inputs
};

enum class Subspace { range_gamma, range_gamma_star_b, range_pi_b };
Subspace parse_subspace(const std::string& s);
std::string to_string(Subspace s);
Field sample_subspace(const ResolventPlan& plan, Subspace s, Rng& rng, int band);

// --- off-diagonal decay ------------------------------------------------------------------

struct OffdiagResult {
  double order = 0.0;       // -slope of log ||1_E U_t 1_F u|| against log(1 + d/t)
  double residual = 0.0;    // rms of the fit
  bool noise_floor = false; // every norm below 1e-14: order is a lower bound
  std::size_t used = 0;     // number of fitted samples
  std::vector<std::array<double, 3>> samples;  // (t, d/t, norm)
};
/// F = B(center, t), E = points at distance >= d from F. The norm at each (t, d) is the
/// root mean square over `inputs` random u supported in F with ||u||_2 = 1 (a
/// Hilbert-Schmidt-type average of the block 1_E U_t 1_F). t values with
/// (1 + max d/t) t > period/2 are skipped.
OffdiagResult offdiag_order(const std::function<Field(double, const Field&)>& family,
                            const Torus& torus, int fiber, const std::vector<double>& ts,
                            const std::vector<double>& separations, std::size_t center,
                            std::uint64_t seed, int inputs = 8);
/// Default t values: three geometric points ending at the largest admissible
/// t = period / (2 (1 + max separation)), ratio 2^{1/8}.
std::vector<double> offdiag_times(const Torus& torus, const std::vector<double>& separations);

// --- square functions -------------------------------------------------------------------

/// tent_norm((Q_t^B)^M u, p) / ||u||_p for u sampled in the subspace.
RatioReport sq_equiv(const ResolventPlan& plan, double p, int M, Subspace subspace,
                     const TimeGrid& grid, const TrialOptions& opts);

struct LowFreqReport {
  RatioReport ratio;      // (Q_t^B)^M P_t^N u
  RatioReport approx;     // Q_t^B P_t^N u - gamma_t A_t P_t^N u
  RatioReport principal;  // gamma_t A_t P_t^N u
  double reassembly_error = 0.0;
};
LowFreqReport low_freq(const ResolventPlan& plan, double p, int M, int n_tilde,
                       const TimeGrid& grid, const TrialOptions& opts);

struct HighFreqReport {
  RatioReport ratio;  // (Q_t^B)^M (I - P_t^N) u, u in R(Gamma)
  double identity_error = 0.0;  // (I - P_t^N) u = t Gamma (sum_{k<N} P_t^k) Q_t u
};
HighFreqReport high_freq(const ResolventPlan& plan, double p, int M, int n_tilde,
                         const TimeGrid& grid, const TrialOptions& opts);

/// tent_norm((Q_t^B)^M G(t, .)) / vertical_norm(G) for random bump fields G.
RatioReport conical_vertical(const ResolventPlan& plan, double p, int M, const TimeGrid& grid,
                             const TrialOptions& opts);

// --- elliptic experiments ----------------------------------------------------------------

/// ||L^{1/2} f||_p / ||grad f||_p with L^{1/2} f read off (Pi_B^2)^{1/2}(f, 0).
RatioReport kato_experiment(const ResolventPlan& plan, double p, const TrialOptions& opts);

struct RieszReport {
  RatioReport ratio;              // ||grad L^{-1/2} g||_p / ||g||_p, g = L^{1/2} f
  double involution_error = 0.0;  // max ||sgn(sgn(g,0)) - (g,0)|| / ||g||
};
RieszReport riesz_experiment(const ResolventPlan& plan, double p, const TrialOptions& opts);

struct SobolevReport {
  double p = 0.0;
  double p_star = 0.0;     // n p / (n + p)
  bool meaningful = false; // p_star > 1 (otherwise a quasi-norm is used)
  RatioReport ratio;       // sup_t ||t R_t^B u||_p / ||u||_{p_star}
};
SobolevReport sobolev_resolvent_probe(const ResolventPlan& plan, double p,
                                      const std::vector<double>& ts, const TrialOptions& opts);

/// ||sgn(Pi_B)^2 u - u||_2 / ||u||_2 for u sampled in R(Pi_B).
RatioReport sgn_involution(const ResolventPlan& plan, const TrialOptions& opts);

// --- identities, Hodge -------------------------------------------------------------------

struct IdentityReport {
  double resolvent = 0.0;      // ||(I + i t Pi_B) R_t u - u|| / ||u||
  double p_product = 0.0;      // ||P_t u - R_t R_{-t} u|| / ||u||
  double t_pi_q = 0.0;         // ||t Pi_B Q_t u - (u - P_t u)|| / ||u||
  double qq_product = 0.0;     // unperturbed: ||Q_t Q_s u - (s/t)(I - P_t) P_s u|| / ||u||
  double high_freq = 0.0;      // unperturbed, u in R(Gamma), N = n_tilde
  double commutation = 0.0;    // unperturbed: ||Q_t Q_s u - Q_s Q_t u|| / ||u||
  double max() const;
};
IdentityReport algebraic_identities(const ResolventPlan& plan, double t, double s, const Field& u,
                                    int n_tilde);

struct HodgeCheck {
  double sum_error = 0.0;          // ||u_N + u_G + u_S - u|| / ||u||
  double idempotency_error = 0.0;  // max over components of ||P(c) - c|| / ||u||
  double gamma_residual = 0.0;     // ||Gamma u_G|| / (||Pi|| ||u||)
  double stabilization = 0.0;
  bool exact = false;
};
HodgeCheck hodge_check(const ResolventPlan& plan, const Field& u);

// --- Schur uniformity, factorisation, tent laws ------------------------------------------

struct SchurReport {
  std::vector<double> gammas;
  std::vector<NormEstimate> norms;
  double max_over_min = 0.0;
};
/// T^{2,2} norms of T_{K^+_{eps + i gamma}} with K(t,s) = (I - P_t^N) P_s Q_s^{N-1}.
SchurReport schur_uniformity(const ResolventPlan& plan, const TimeGrid& grid, int n_tilde,
                             double eps, const std::vector<double>& gammas, std::uint64_t seed);

struct FactorizationReport {
  double p = 0.0, q = 0.0;
  std::vector<FactorizationResult> pairs;
  double max_ratio = 0.0;
};
FactorizationReport factorization_experiment(const Torus& torus, const TimeGrid& grid, double p,
                                             double q, int pairs, std::uint64_t seed,
                                             int workers = 1);

struct TentLawReport {
  std::size_t fields = 0;
  std::size_t monotonicity_violations = 0;
  double max_growth_exponent_excess = -1e300;  // max(exponent - (n/min(p,2) + 0.2))
  double max_fubini_error = 0.0;
};
TentLawReport tent_laws(const Torus& torus, const TimeGrid& grid, int fields,
                        const std::vector<double>& ps, const std::vector<double>& alphas,
                        std::uint64_t seed, int workers = 1);

/// max over columns of carleson_norm(gamma_t e_k).
double principal_part_carleson(const PrincipalPart& gamma);

// --- dense oracle ------------------------------------------------------------------------

struct DenseOracleInfo {
  std::string method;        // "eigen" or "schur"
  double condition = 0.0;    // condition number of the eigenbasis
  std::size_t null_dim = 0;  // eigenvalues treated as 0
};
/// f(Pi_B) u by dense eigendecomposition, with a basis of the null space taken
/// from the SVD and f evaluated at exactly 0 there (so sgn needs sgn(0) = 0), and a
/// Schur-Parlett fallback when the eigenbasis condition number exceeds 1e8.
Field dense_oracle(const PerturbedDirac& op, const std::function<cplx(cplx)>& f, const Field& u,
                   DenseOracleInfo* info = nullptr);

}  // namespace hodgelab
