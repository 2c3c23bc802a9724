#pragma once

// Tent spaces on (time grid) x (torus): conical square functions T^{p,q},
// Carleson norms T^{infty,q}, non-tangential norms T^{p,infty}, vertical
// square functions, dyadic averaging A_t, the principal part gamma_t,
// Schur-type integral operators in t and the Cohn-Verbitsky factorisation
// check.
//
// Discrete balls B(x, r) are volume-exact: grid offsets sorted by torus
// distance are filled with unit weight shell by shell, the last shell
// partially (equal weight per offset), until the total weight equals
// c_n r^n / h^n. Weights therefore grow monotonically with r and the Fubini
// identity at p = 2 holds exactly.

#include <functional>
#include <iosfwd>
#include <optional>

#include "hodgelab/resolvent.hpp"

namespace hodgelab {

class TentError : public Error {
 public:
  explicit TentError(const std::string& what) : Error("tent", what) {}
};

/// Geometric grid t_1 < ... < t_K with log-trapezoid weights for dt/t.
class TimeGrid {
 public:
  /// K = round(log(t_max/t_min)/log(ratio)) + 1 points starting at t_min.
  static TimeGrid geometric(double t_min, double t_max, double ratio = std::exp2(0.25));
  /// [4h, period/8] with ratio 2^{1/4} for m >= 64; [max(h, period/32), period/8] (at
  /// least one octave, at most period/4) on coarser grids.
  static TimeGrid standard(const Torus& torus);

  std::size_t size() const noexcept { return t_.size(); }
  double t(std::size_t i) const { return t_[i]; }
  double weight(std::size_t i) const { return w_[i]; }
  const std::vector<double>& times() const noexcept { return t_; }
  const std::vector<double>& weights() const noexcept { return w_; }
  double ratio() const noexcept { return ratio_; }
  double t_min() const { return t_.front(); }
  double t_max() const { return t_.back(); }
  bool operator==(const TimeGrid& o) const { return t_ == o.t_; }

 private:
  TimeGrid(std::vector<double> t, double ratio);
  std::vector<double> t_, w_;
  double ratio_;
};

/// F(t_i, x) sampled on a TimeGrid x torus.
class TentField {
 public:
  TentField(TimeGrid grid, Torus torus, int fiber);
  TentField(TimeGrid grid, std::vector<Field> slices);

  const TimeGrid& grid() const noexcept { return grid_; }
  const Torus& torus() const noexcept { return torus_; }
  int fiber_dim() const noexcept { return fiber_; }
  std::size_t size() const noexcept { return slices_.size(); }
  Field& slice(std::size_t i) { return slices_[i]; }
  const Field& slice(std::size_t i) const { return slices_[i]; }

  TentField& operator+=(const TentField& o);
  TentField& operator-=(const TentField& o);
  TentField& operator*=(cplx s);
  friend TentField operator-(TentField a, const TentField& b) { return a -= b; }
  friend TentField operator+(TentField a, const TentField& b) { return a += b; }
  TentField zeros_like() const { return TentField(grid_, torus_, fiber_); }

  /// |F(t_i, x)| per slice (fiber Euclidean norm), for products and sups.
  std::vector<std::vector<double>> magnitudes() const;

 private:
  TimeGrid grid_;
  Torus torus_;
  int fiber_;
  std::vector<Field> slices_;
};

/// Volume of the unit ball in R^n.
double unit_ball_volume(int n);

/// Weights omega(offset) of the discrete ball of radius r (see file comment).
struct BallStencil {
  std::vector<std::ptrdiff_t> offsets;  // linear-index shifts encoded as Coord deltas
  std::vector<Coord> deltas;
  std::vector<double> weights;          // in (0, 1]
  double volume;                        // sum of weights * h^n = c_n r^n
};
BallStencil ball_stencil(const Torus& torus, double radius);

/// T^{p,q}_alpha: (sum_x h^n (sum_i w_i t_i^{-n} sum_y omega h^n |F|^q)^{p/q})^{1/p}.
/// p = infinity takes the sup over x. Requires alpha t_max <= period / 2.
double tent_norm(const TentField& f, double p, double alpha = 1.0, double q = 2.0);
/// T^{infty,q}: sup_{x, r in grid} (r^{-n} int_{t_1}^{r} sum_{B(x,r)} |F|^q dt/t)^{1/q}.
double carleson_norm(const TentField& f, double q = 2.0);
/// T^{p,infty}: L^p norm of the cone supremum N(x) = sup_{t_i, |y-x| < alpha t_i} |F(t_i, y)|.
double nontangential_norm(const TentField& f, double p, double alpha = 1.0);
/// ||(sum_i w_i |F(t_i, .)|^2)^{1/2}||_p.
double vertical_norm(const TentField& f, double p);

/// Level j of Delta_t: 2^{j-1} < t/h <= 2^j, clamped at 0; throws when 2^j > m or t <= 0.
int dyadic_level(const Torus& torus, double t);
/// A_t u: average over the dyadic cube of Delta_t containing x.
Field dyadic_average(const Field& u, double t);

/// gamma_t(x) for t on the grid: column k is (Q_t^B e_k)(x).
struct PrincipalPart {
  TimeGrid grid;
  std::vector<MatrixField> gamma;
  TentField column(int k) const;
};
PrincipalPart principal_part(const ResolventPlan& plan, const TimeGrid& grid);

struct PrincipalSplit {
  TentField full;       // Q_t^B P_t^N u
  TentField approx;     // full - principal
  TentField principal;  // gamma_t A_t P_t^N u
};
/// P_t is the unperturbed P_t (frequency-diagonal).
PrincipalSplit principal_split(const ResolventPlan& plan, const PrincipalPart& gamma,
                               const Field& u, int n_tilde);

/// K(t_i, s_j) = L_i R_j with adjoint factors for norm estimation.
struct SeparableKernel {
  std::function<Field(std::size_t, const Field&)> left, right;
  std::function<Field(std::size_t, const Field&)> left_adjoint, right_adjoint;
};
/// K(t,s) = (I - P_t^N) P_s Q_s^{N-1} for the unperturbed operator of `plan`.
SeparableKernel high_frequency_kernel(const ResolventPlan& plan, const TimeGrid& grid,
                                      int n_tilde);
/// K = identity.
SeparableKernel identity_kernel();

/// K^-_z(t,s) = [s > t](t/s)^z K(t,s); K^+_z(t,s) = [t > s](s/t)^z K(t,s);
/// half weight on s = t.
enum class SchurVariant { minus, plus };
TentField schur_apply(const SeparableKernel& k, SchurVariant v, cplx z, const TentField& f);
TentField schur_apply_adjoint(const SeparableKernel& k, SchurVariant v, cplx z,
                              const TentField& g);
/// Generic kernel: out(t_i) = sum_j w_j k(t_i, s_j) K(i, j, F(s_j)).
TentField schur_apply(const std::function<Field(std::size_t, std::size_t, const Field&)>& k,
                      SchurVariant v, cplx z, const TentField& f);

struct NormEstimate {
  double estimate;      // max of probe ratios and power-iteration values
  double power;         // power-iteration value
  double probe_max;     // best random probe ratio
  int iterations;
};
/// Operator norm of T_K on T^{2,2} (i.e. on L^2(dt/t; L^2)) by random probes and power
/// iteration on T^*T.
NormEstimate schur_norm_estimate(const SeparableKernel& k, SchurVariant v, cplx z,
                                 const TimeGrid& grid, const Torus& torus, int fiber,
                                 std::uint64_t seed, int probes = 4, int iterations = 20);

/// Sum of Gaussian bumps in (log t, x) with random centres, widths and amplitudes;
/// the same stream gives the same continuum function on every grid.
TentField random_tent_bumps(const TimeGrid& grid, const Torus& torus, int fiber, Rng& rng,
                            int bumps = 6);

struct FactorizationResult {
  double lhs;  // ||F G||_{T^{p,q}}
  double f_norm;  // ||F||_{T^{p,infty}}
  double g_norm;  // ||G||_{T^{infty,q}}
  double ratio;   // lhs / (f_norm g_norm); 0 when lhs = 0
};
/// Products use pointwise magnitudes |F(t,y)| |G(t,y)|.
FactorizationResult factorization_check(const TentField& f, const TentField& g, double p,
                                        double q);

struct NontangentialResult {
  double norm;        // ||A_t T_t u||_{T^{p,infty}}
  double maximal;     // ||M_q u||_p, q = max(1, p/2)
};
NontangentialResult nontangential_max(const Field& u,
                                      const std::function<Field(double, const Field&)>& family,
                                      const TimeGrid& grid, double p);
/// Centred maximal function (sup over r in grid of ball averages of |u|^q)^{1/q}.
Field maximal_function(const Field& u, const TimeGrid& grid, double q);

/// C = (int_0^infty (tau/(1+tau^2))^{2N} dtau/tau)^{-1} by log-trapezoid quadrature.
double calderon_constant(int n_tilde);

/// Serialise as a header "K,n,m,period,N" and the time values, then one field block per slice.
void write_tent_csv(std::ostream& os, const TentField& f);

}  // namespace hodgelab
