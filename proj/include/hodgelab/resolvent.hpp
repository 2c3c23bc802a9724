#pragma once

// Resolvent solves (I + tau Pi_B)^{-1} and everything built from them:
// R_t, P_t, Q_t and their powers, Hodge projections and the potential map.

#include <atomic>
#include <map>
#include <memory>
#include <mutex>

#include "hodgelab/dirac.hpp"

namespace hodgelab {

class SolveError : public Error {
 public:
  explicit SolveError(const std::string& what) : Error("resolvent", what) {}
};

enum class SolverMode { automatic, frequency_diagonal, iterative, dense };

struct SolverOptions {
  SolverMode mode = SolverMode::automatic;
  double tol = 1e-10;      // relative residual for the iterative mode
  int max_iterations = 3000;
  int restart = 80;
  bool precondition = true;  // unperturbed resolvent at the same tau
};

struct SolveStats {
  long solves = 0;
  long iterations = 0;
  double max_residual = 0.0;
  long warnings = 0;
};

class ResolventPlan {
 public:
  explicit ResolventPlan(std::shared_ptr<const PerturbedDirac> op, SolverOptions options = {});

  const PerturbedDirac& op() const noexcept { return *op_; }
  std::shared_ptr<const PerturbedDirac> op_ptr() const noexcept { return op_; }
  SolverMode mode() const noexcept { return mode_; }
  const SolverOptions& options() const noexcept { return options_; }

  /// v with (I + tau Pi_B) v = u.
  Field solve(cplx tau, const Field& u) const;
  /// R_t u = (I + i t Pi_B)^{-1} u; t = 0 returns u and counts a warning.
  Field resolvent(double t, const Field& u) const;
  /// Plan for the unperturbed Pi on the same torus.
  const ResolventPlan& unperturbed() const;

  SolveStats stats() const;
  void reset_stats() const;
  /// Upper bound max ||Gamma-hat|| (1 + ||B1||_inf ||B2||_inf) for ||Pi_B||.
  double pi_bound() const noexcept { return pi_bound_; }

 private:
  Field solve_frequency_diagonal(cplx tau, const Field& u) const;
  Field solve_dense(cplx tau, const Field& u) const;
  Field solve_iterative(cplx tau, const Field& u) const;
  void record(long iterations, double residual) const;

  std::shared_ptr<const PerturbedDirac> op_;
  SolverOptions options_;
  SolverMode mode_;
  double pi_bound_ = 0.0;
  std::shared_ptr<const ResolventPlan> unperturbed_;

  mutable std::mutex dense_mu_;
  mutable std::unique_ptr<Matrix> dense_;
  mutable std::map<std::pair<double, double>, std::shared_ptr<Eigen::PartialPivLU<Matrix>>> lu_cache_;

  mutable std::mutex stats_mu_;
  mutable SolveStats stats_;
};

/// Both R_t u and R_{-t} u.
struct ResolventPair {
  Field plus;   // R_t u
  Field minus;  // R_{-t} u
};
ResolventPair resolvent_pair(const ResolventPlan& plan, double t, const Field& u);

/// P_t = (I + t^2 Pi_B^2)^{-1} = (R_t + R_{-t}) / 2.
Field p_t(const ResolventPlan& plan, double t, const Field& u);
/// Q_t = t Pi_B (I + t^2 Pi_B^2)^{-1} = (R_{-t} - R_t) / (2i).
Field q_t(const ResolventPlan& plan, double t, const Field& u);
Field q_t_power(const ResolventPlan& plan, double t, int power, const Field& u);
Field p_t_power(const ResolventPlan& plan, double t, int power, const Field& u);

struct HodgeParts {
  Field null;                // in N(Pi_B)
  Field range_gamma;         // in closure R(Gamma)
  Field range_gamma_star_b;  // in closure R(Gamma^*_B)
  double stabilization = 0.0;  // relative size of the last extrapolation step
  bool exact = false;          // per-frequency projections (unperturbed)
};

/// Exact per-frequency projections for unperturbed operators; for perturbed
/// ones the large-t limits u_N = lim P_t u, u_Gamma = lim t Gamma Q_t u and
/// u_Gamma*B = lim t Gamma^*_B Q_t u, Richardson-extrapolated from
/// t = 2^10 period and 2^12 period.
HodgeParts hodge_projections(const ResolventPlan& plan, const Field& u);
/// Only the null-space component (cheaper than the full decomposition).
Field null_projection(const ResolventPlan& plan, const Field& u, double* stabilization = nullptr);

struct PotentialResult {
  Field potential;      // f with Gamma f = u
  double gradient_norm; // ||grad (x) f||_2
  double range_residual;
};

/// Moore-Penrose potential f-hat(xi) = Gamma-hat(xi)^+ u-hat(xi) (rank cutoff
/// 1e-10 sigma_max per frequency). Throws when u is not in R(Gamma) to `tol`.
PotentialResult potential_map(const PerturbedDirac& op, const Field& u, double tol = 1e-8);

}  // namespace hodgelab
