#pragma once

// Holomorphic functional calculus for the bisectorial operator Pi_B:
// Cauchy-integral quadrature on the boundary of a double sector for decaying
// functions, the regularised limit for bounded ones, sgn(Pi_B) through the
// integral of Q_t dt/t, (Pi_B^2)^{1/2}, and empirical calculus bounds.

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "hodgelab/resolvent.hpp"

namespace hodgelab {

class FuncalcError : public Error {
 public:
  explicit FuncalcError(const std::string& what) : Error("funcalc", what) {}
};

/// A holomorphic function on an open double sector S_mu.
/// Decaying functions (alpha, beta > 0) satisfy |psi(z)| <= C |z|^alpha / (1 + |z|^{alpha+beta}).
/// Bounded functions have alpha = beta = 0 and are applied through regularisation.
struct PsiFunction {
  std::string id;
  std::string formula;
  std::function<cplx(cplx)> eval;
  double alpha = 0.0;
  double beta = 0.0;
  double mu = M_PI / 2;  // holomorphic on S_mu (open)
  bool nondegenerate = true;
  bool decaying() const noexcept { return alpha > 0.0 && beta > 0.0; }
  cplx operator()(cplx z) const { return eval(z); }
};

/// Parse a dictionary id: "zero", "rational(a,b)", "resolvent(t)", "qpower(M)",
/// "lowfreq(M,N)", "highfreq(M,N)", "one", "phase(tau)", "sgn".
PsiFunction make_psi(const std::string& id);
/// Pointwise product; the decay exponents add.
PsiFunction product(const PsiFunction& a, const PsiFunction& b);

struct PsiDictionaryEntry {
  std::string pattern;
  std::string formula;
  std::string decay_class;
  std::string anchor;
};
std::vector<PsiDictionaryEntry> psi_dictionary();
/// Human-readable description of one entry, e.g. for "rational(1,1)".
std::string describe_psi(const std::string& id);

/// Sampled sup_z |psi(z)| (1 + |z|^{alpha+beta}) / |z|^alpha over the rays of
/// S_theta and r in [1e-6, 1e6]. Throws when the declared class is violated
/// (the ratio keeps growing towards either end of the window).
double audit_decay_class(const PsiFunction& psi, double theta);

/// Quadrature for (1/2 pi i) int_{boundary S_theta} psi(z) (z - D)^{-1} dz.
/// Nodes r = 2^{q / steps_per_octave} on the four rays +-r e^{+-i theta},
/// trapezoid in log r.
struct Contour {
  double theta = M_PI / 4;
  double r_min = 1e-3;
  double r_max = 1e3;
  int steps_per_octave = 4;

  int nodes_per_ray() const;
  /// Nodes z_k with their weights (orientation, 1/(2 pi i) and dz = z ds folded in),
  /// so that psi(D) u ~ sum_k w_k psi(z_k) (I + tau_k D)^{-1} u with tau_k = -1/z_k.
  void nodes(std::vector<cplx>& z, std::vector<cplx>& w) const;
};

/// Spectral bounds used to place quadrature windows: every nonzero eigenvalue
/// of Pi_B has modulus in [lower, upper].
struct SpectralWindow {
  double lower;
  double upper;
};
SpectralWindow spectral_window(const ResolventPlan& plan);

struct FuncalcOptions {
  double theta = std::numeric_limits<double>::quiet_NaN();  // NaN: (omega + pi/2)/2
  double omega = std::numeric_limits<double>::quiet_NaN();  // NaN: audited
  double tol = 1e-6;       // relative change under refinement
  double padding = 1e5;    // window padding beyond the spectral range
  int steps_per_octave = 4;
  int max_refinements = 4;
  int audit_trials = 32;
  std::uint64_t audit_seed = 0;
};

/// Accretivity angle of the plan's operator (0 when unperturbed).
double operator_angle(const ResolventPlan& plan, const FuncalcOptions& opts = {});
Contour default_contour(const ResolventPlan& plan, const FuncalcOptions& opts = {});

struct QuadratureReport {
  int refinements = 0;      // refinement steps taken
  double change = 0.0;      // relative change at the last step
  long solves = 0;
  Contour contour;          // final contour
};

/// psi(Pi_B) u by contour quadrature; refines (half step, window x4) until the
/// relative change is <= tol. Throws "contour quadrature not converged".
Field apply_psi(const ResolventPlan& plan, const PsiFunction& psi, const Field& u,
                const FuncalcOptions& opts = {}, QuadratureReport* report = nullptr);
/// Same with an explicit starting contour.
Field apply_psi(const ResolventPlan& plan, const PsiFunction& psi, const Contour& contour,
                const Field& u, const FuncalcOptions& opts = {},
                QuadratureReport* report = nullptr);

/// Bounded f: f(Pi_B)u = lim psi_n(Pi_B)u with psi_n(z) = f(z) g_n(z/c),
/// g_n(z) = n^2 z^2 / ((1 + n^2 z^2)(1 + z^2/n^2)), n = 4, 16, 64, ...,
/// Richardson-extrapolated in n^{-2} until successive values agree to 1e-4.
/// c is the geometric centre of the spectral window. Decaying psi are passed
/// straight to apply_psi.
Field apply_function(const ResolventPlan& plan, const PsiFunction& f, const Field& u,
                     const FuncalcOptions& opts = {});

enum class NullPolicy { reject, project };

struct SgnOptions {
  double t_min = 0.0;  // 0: 1e-3 / upper spectral bound
  double t_max = 0.0;  // 0: 1e3 / lower spectral bound
  int steps_per_octave = 4;
  int max_refinements = 3;
  double tol = 1e-6;
  double null_tol = 1e-6;
  NullPolicy null_policy = NullPolicy::reject;
};

struct SgnReport {
  int refinements = 0;
  double change = 0.0;
  double null_fraction = 0.0;
  long solves = 0;
};

/// sgn(Pi_B) u = (2/pi) int_0^infty Q_t u dt/t, log-trapezoid with first-order
/// tail corrections Q_{t_min} u + Q_{t_max} u; refined by halving the step and
/// doubling the window at each end.
Field apply_sgn(const ResolventPlan& plan, const Field& u, const SgnOptions& opts = {},
                SgnReport* report = nullptr);
/// (Pi_B^2)^{1/2} u = sgn(Pi_B) Pi_B u.
Field sqrt_pib2(const ResolventPlan& plan, const Field& u, const SgnOptions& opts = {});

struct CalculusBound {
  double estimate = 0.0;   // max ratio
  std::string argmax_function;
  int argmax_trial = -1;
  std::vector<double> ratios;
};

/// Empirical sup ||f(Pi_B) u||_p / ||u||_p over the given dictionary ids,
/// each normalised by its sampled sup on the boundary of S_theta.
CalculusBound calculus_bound_estimate(const ResolventPlan& plan, double p,
                                      const std::vector<std::string>& family, int trials,
                                      std::uint64_t seed, const FuncalcOptions& opts = {});

/// Sampled sup |f| on the boundary rays of S_theta, r in [1e-6, 1e6] * scale.
double sector_sup(const PsiFunction& f, double theta, double scale = 1.0);

}  // namespace hodgelab
