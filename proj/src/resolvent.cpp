#include "hodgelab/resolvent.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace hodgelab {

namespace {

constexpr std::size_t kDenseLimit = 4096;

// Per-frequency inverses of (I + tau Pi-hat(xi)).
std::vector<Matrix> frequency_inverses(const PerturbedDirac& op, cplx tau) {
  const int n = op.fiber_dim();
  std::vector<Matrix> inv;
  inv.reserve(op.torus().num_points());
  const Matrix id = Matrix::Identity(n, n);
  for (std::size_t k = 0; k < op.torus().num_points(); ++k) {
    const Matrix& g = op.gamma_hat_at(k);
    inv.push_back((id + tau * (g + g.adjoint())).partialPivLu().inverse());
  }
  return inv;
}

Field apply_frequency_matrices(const std::vector<Matrix>& mats, const Field& u) {
  const int n = u.fiber_dim();
  Field hat = forward_transform(u);
  Vector in(n), out(n);
  for (std::size_t k = 0; k < mats.size(); ++k) {
    for (int c = 0; c < n; ++c) in(c) = hat.at(k, c);
    out.noalias() = mats[k] * in;
    for (int c = 0; c < n; ++c) hat.at(k, c) = out(c);
  }
  return inverse_transform(hat);
}

Eigen::Map<const Vector> as_vector(const Field& f) {
  return {f.values().data(), static_cast<Eigen::Index>(f.size())};
}

Field from_vector(const Field& shape, const Vector& v) {
  Field f = shape.zeros_like();
  for (Eigen::Index i = 0; i < v.size(); ++i) f.values()[i] = v(i);
  return f;
}

}  // namespace

ResolventPlan::ResolventPlan(std::shared_ptr<const PerturbedDirac> op, SolverOptions options)
    : op_(std::move(op)), options_(options), mode_(options.mode) {
  if (!op_) throw SolveError("resolvent plan needs an operator");
  if (mode_ == SolverMode::automatic)
    mode_ = op_->is_unperturbed() ? SolverMode::frequency_diagonal : SolverMode::iterative;
  if (mode_ == SolverMode::frequency_diagonal && !op_->is_unperturbed())
    throw SolveError("frequency-diagonal mode requires B1 = B2 = I");
  if (mode_ == SolverMode::dense && op_->total_dim() > kDenseLimit)
    throw SolveError("dense mode limited to total dimension " + std::to_string(kDenseLimit));
  double symbol_max = 0.0;
  for (std::size_t k = 0; k < op_->torus().num_points(); ++k)
    symbol_max = std::max(symbol_max, op_->gamma_hat_at(k).operatorNorm());
  const double b1 = op_->b1() ? op_->b1()->sup_norm() : 1.0;
  const double b2 = op_->b2() ? op_->b2()->sup_norm() : 1.0;
  pi_bound_ = symbol_max * (1.0 + b1 * b2);
  if (!op_->is_unperturbed()) {
    SolverOptions un = options_;
    un.mode = SolverMode::frequency_diagonal;
    unperturbed_ = std::make_shared<ResolventPlan>(
        std::make_shared<PerturbedDirac>(op_->unperturbed()), un);
  }
}

const ResolventPlan& ResolventPlan::unperturbed() const {
  return unperturbed_ ? *unperturbed_ : *this;
}

SolveStats ResolventPlan::stats() const {
  std::lock_guard<std::mutex> lock(stats_mu_);
  return stats_;
}

void ResolventPlan::reset_stats() const {
  std::lock_guard<std::mutex> lock(stats_mu_);
  stats_ = SolveStats{};
}

void ResolventPlan::record(long iterations, double residual) const {
  std::lock_guard<std::mutex> lock(stats_mu_);
  stats_.solves += 1;
  stats_.iterations += iterations;
  stats_.max_residual = std::max(stats_.max_residual, residual);
}

Field ResolventPlan::solve(cplx tau, const Field& u) const {
  if (u.torus() != op_->torus() || u.fiber_dim() != op_->fiber_dim())
    throw SolveError("dimension mismatch in resolvent solve");
  if (tau == cplx(0.0, 0.0)) {
    record(0, 0.0);
    return u;
  }
  switch (mode_) {
    case SolverMode::frequency_diagonal:
      return solve_frequency_diagonal(tau, u);
    case SolverMode::dense:
      return solve_dense(tau, u);
    default:
      return solve_iterative(tau, u);
  }
}

Field ResolventPlan::resolvent(double t, const Field& u) const {
  if (t == 0.0) {
    std::lock_guard<std::mutex> lock(stats_mu_);
    stats_.warnings += 1;
    return u;
  }
  return solve(cplx(0.0, t), u);
}

Field ResolventPlan::solve_frequency_diagonal(cplx tau, const Field& u) const {
  Field v = apply_frequency_matrices(frequency_inverses(*op_, tau), u);
  record(0, 0.0);
  return v;
}

Field ResolventPlan::solve_dense(cplx tau, const Field& u) const {
  std::shared_ptr<Eigen::PartialPivLU<Matrix>> lu;
  {
    std::lock_guard<std::mutex> lock(dense_mu_);
    if (!dense_) dense_ = std::make_unique<Matrix>(op_->dense_matrix());
    const auto key = std::make_pair(tau.real(), tau.imag());
    auto it = lu_cache_.find(key);
    if (it == lu_cache_.end()) {
      if (lu_cache_.size() > 64) lu_cache_.clear();
      Matrix a = Matrix::Identity(dense_->rows(), dense_->cols()) + tau * (*dense_);
      it = lu_cache_.emplace(key, std::make_shared<Eigen::PartialPivLU<Matrix>>(a)).first;
    }
    lu = it->second;
  }
  const Vector x = lu->solve(as_vector(u));
  Field v = from_vector(u, x);
  Field res = v;
  res += tau * op_->apply_pi_b(v);
  res -= u;
  const double nb = coefficient_norm(u);
  record(0, nb > 0 ? coefficient_norm(res) / nb : 0.0);
  return v;
}

// Restarted GMRES, right-preconditioned by the unperturbed resolvent.
Field ResolventPlan::solve_iterative(cplx tau, const Field& u) const {
  const std::vector<Matrix> pre =
      options_.precondition ? frequency_inverses(*op_, tau) : std::vector<Matrix>{};
  auto apply_m = [&](const Field& f) { return pre.empty() ? f : apply_frequency_matrices(pre, f); };
  auto apply_a = [&](const Field& f) {
    Field out = f;
    out += tau * op_->apply_pi_b(f);
    return out;
  };

  const double bnorm = coefficient_norm(u);
  if (bnorm == 0.0) {
    record(0, 0.0);
    return u.zeros_like();
  }
  const Eigen::Index dim = static_cast<Eigen::Index>(u.size());
  const int restart = std::max(1, std::min<int>(options_.restart, static_cast<int>(dim)));
  // The residual u - x - tau Pi_B x cannot be evaluated more accurately than
  // eps |tau| ||Pi_B|| ||x||; for very large |tau| that level exceeds tol, so
  // the target is raised to it (a normwise backward-error stop).
  const double eps = std::numeric_limits<double>::epsilon();
  double target = options_.tol * bnorm;
  auto residual = [&](const Field& xv, Field& rv) {
    rv = u - xv;
    rv -= tau * op_->apply_pi_b(xv);
    const double xn = coefficient_norm(xv);
    const double level = 64.0 * eps * (bnorm + xn + std::abs(tau) * pi_bound_ * xn);
    target = std::max(options_.tol * bnorm, level);
    return coefficient_norm(rv);
  };

  Field x = apply_m(u);
  Field r = u;
  double rnorm = residual(x, r);
  long total_iters = 0;

  std::vector<Vector> basis;
  Matrix h;
  Vector g, cs, sn;
  while (rnorm > target && total_iters < options_.max_iterations) {
    basis.assign(1, as_vector(r) / rnorm);
    h = Matrix::Zero(restart + 1, restart);
    g = Vector::Zero(restart + 1);
    cs = Vector::Zero(restart);
    sn = Vector::Zero(restart);
    g(0) = rnorm;
    int used = 0;
    for (int j = 0; j < restart && total_iters < options_.max_iterations; ++j) {
      ++total_iters;
      Vector w = as_vector(apply_a(apply_m(from_vector(u, basis[j]))));
      for (int pass = 0; pass < 2; ++pass) {
        for (int i = 0; i <= j; ++i) {
          const cplx c = basis[i].dot(w);
          h(i, j) += c;
          w -= c * basis[i];
        }
      }
      const double wn = w.norm();
      h(j + 1, j) = wn;
      for (int i = 0; i < j; ++i) {
        const cplx a = h(i, j), b = h(i + 1, j);
        h(i, j) = std::conj(cs(i)) * a + std::conj(sn(i)) * b;
        h(i + 1, j) = -sn(i) * a + cs(i) * b;
      }
      const cplx a = h(j, j), b = h(j + 1, j);
      const double den = std::sqrt(std::norm(a) + std::norm(b));
      if (den == 0.0) {
        cs(j) = 1.0;
        sn(j) = 0.0;
      } else {
        cs(j) = a / den;
        sn(j) = b / den;
      }
      h(j, j) = std::conj(cs(j)) * a + std::conj(sn(j)) * b;
      h(j + 1, j) = 0.0;
      g(j + 1) = -sn(j) * g(j);
      g(j) = std::conj(cs(j)) * g(j);
      used = j + 1;
      if (std::abs(g(j + 1)) <= 0.5 * target || wn == 0.0) break;
      basis.push_back(w / wn);
    }
    Vector y = h.topLeftCorner(used, used).triangularView<Eigen::Upper>().solve(g.head(used));
    Vector update = Vector::Zero(dim);
    for (int i = 0; i < used; ++i) update += y(i) * basis[i];
    x += apply_m(from_vector(u, update));
    rnorm = residual(x, r);
  }
  record(total_iters, rnorm / bnorm);
  if (!(rnorm <= target)) {
    std::ostringstream msg;
    msg << "resolvent solve failed (tau = " << tau << ", residual = " << rnorm / bnorm << ")";
    throw SolveError(msg.str());
  }
  return x;
}

// --- P_t, Q_t -------------------------------------------------------------------------

ResolventPair resolvent_pair(const ResolventPlan& plan, double t, const Field& u) {
  return {plan.resolvent(t, u), plan.resolvent(-t, u)};
}

Field p_t(const ResolventPlan& plan, double t, const Field& u) {
  if (!(t > 0.0)) throw SolveError("P_t requires t > 0");
  auto r = resolvent_pair(plan, t, u);
  Field out = r.plus;
  out += r.minus;
  return out *= 0.5;
}

Field q_t(const ResolventPlan& plan, double t, const Field& u) {
  if (!(t > 0.0)) throw SolveError("Q_t requires t > 0");
  auto r = resolvent_pair(plan, t, u);
  Field out = r.minus;
  out -= r.plus;
  return out *= cplx(0.0, -0.5);  // 1/(2i)
}

Field q_t_power(const ResolventPlan& plan, double t, int power, const Field& u) {
  if (power < 1) throw SolveError("Q_t power must be >= 1");
  Field v = u;
  for (int k = 0; k < power; ++k) v = q_t(plan, t, v);
  return v;
}

Field p_t_power(const ResolventPlan& plan, double t, int power, const Field& u) {
  if (power < 0) throw SolveError("P_t power must be >= 0");
  Field v = u;
  for (int k = 0; k < power; ++k) v = p_t(plan, t, v);
  return v;
}

// --- Hodge projections -------------------------------------------------------------

namespace {

HodgeParts exact_hodge(const PerturbedDirac& op, const Field& u) {
  const int n = op.fiber_dim();
  Field hat = forward_transform(u);
  Field hg = hat.zeros_like(), hs = hat.zeros_like(), hn = hat.zeros_like();
  Vector v(n);
  for (std::size_t k = 0; k < op.torus().num_points(); ++k) {
    for (int c = 0; c < n; ++c) v(c) = hat.at(k, c);
    const Matrix& g = op.gamma_hat_at(k);
    Vector pg = Vector::Zero(n), ps = Vector::Zero(n);
    const double gn = g.norm();
    if (gn > 0.0) {
      Eigen::JacobiSVD<Matrix> svd(g, Eigen::ComputeFullU | Eigen::ComputeFullV);
      const auto& s = svd.singularValues();
      const double cut = 1e-10 * s(0);
      for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s(i) <= cut) break;
        const Vector uc = svd.matrixU().col(i);  // range of g
        const Vector vc = svd.matrixV().col(i);  // range of g^H
        pg += uc * uc.dot(v);
        ps += vc * vc.dot(v);
      }
    }
    for (int c = 0; c < n; ++c) {
      hg.at(k, c) = pg(c);
      hs.at(k, c) = ps(c);
      hn.at(k, c) = v(c) - pg(c) - ps(c);
    }
  }
  HodgeParts parts{inverse_transform(hn), inverse_transform(hg), inverse_transform(hs), 0.0, true};
  return parts;
}

Field richardson(const Field& coarse, const Field& fine) {
  // error ~ t^{-2}, t ratio 4
  Field out = fine;
  out *= 16.0;
  out -= coarse;
  return out *= (1.0 / 15.0);
}

constexpr double kHodgeSmallT = 1024.0;  // times the period
constexpr double kHodgeLargeT = 4096.0;
// Stabilization is reported; only a grossly unstable limit is an error.
constexpr double kHodgeGrossInstability = 1e-4;

}  // namespace

Field null_projection(const ResolventPlan& plan, const Field& u, double* stabilization) {
  if (plan.op().is_unperturbed()) {
    if (stabilization) *stabilization = 0.0;
    return exact_hodge(plan.op(), u).null;
  }
  const double ell = plan.op().torus().period();
  const Field a = p_t(plan, kHodgeSmallT * ell, u);
  const Field b = p_t(plan, kHodgeLargeT * ell, u);
  Field n = richardson(a, b);
  if (stabilization) {
    const double nu = lp_norm(u, 2.0);
    *stabilization = nu > 0 ? lp_norm(n - b, 2.0) / nu : 0.0;
  }
  return n;
}

HodgeParts hodge_projections(const ResolventPlan& plan, const Field& u) {
  const PerturbedDirac& op = plan.op();
  if (op.is_unperturbed()) return exact_hodge(op, u);
  const double ell = op.torus().period();
  const double ts[2] = {kHodgeSmallT * ell, kHodgeLargeT * ell};
  std::vector<Field> nulls, gammas, stars;
  for (double t : ts) {
    auto r = resolvent_pair(plan, t, u);
    Field p = r.plus;
    p += r.minus;
    p *= 0.5;
    Field tq = r.minus;
    tq -= r.plus;
    tq *= cplx(0.0, -0.5 * t);  // t Q_t u
    nulls.push_back(std::move(p));
    gammas.push_back(op.apply_gamma(tq));
    stars.push_back(op.apply_gamma_star_b(tq));
  }
  HodgeParts parts{richardson(nulls[0], nulls[1]), richardson(gammas[0], gammas[1]),
                   richardson(stars[0], stars[1]), 0.0, false};
  const double nu = lp_norm(u, 2.0);
  if (nu > 0) {
    parts.stabilization = std::max({lp_norm(parts.null - nulls[1], 2.0),
                                    lp_norm(parts.range_gamma - gammas[1], 2.0),
                                    lp_norm(parts.range_gamma_star_b - stars[1], 2.0)}) /
                          nu;
  }
  if (parts.stabilization > kHodgeGrossInstability)
    throw SolveError("null projection did not stabilize (step " +
                     std::to_string(parts.stabilization) + ")");
  return parts;
}

// --- potential map --------------------------------------------------------------------

PotentialResult potential_map(const PerturbedDirac& op, const Field& u, double tol) {
  if (u.torus() != op.torus() || u.fiber_dim() != op.fiber_dim())
    throw SolveError("dimension mismatch in potential map");
  const int n = op.fiber_dim();
  Field hat = forward_transform(u);
  Field fhat = hat.zeros_like();
  double resid2 = 0.0, total2 = 0.0, grad2 = 0.0;
  Vector v(n);
  for (std::size_t k = 0; k < op.torus().num_points(); ++k) {
    for (int c = 0; c < n; ++c) v(c) = hat.at(k, c);
    total2 += v.squaredNorm();
    const Matrix& g = op.gamma_hat_at(k);
    Vector f = Vector::Zero(n);
    if (g.norm() > 0.0) {
      Eigen::JacobiSVD<Matrix> svd(g, Eigen::ComputeFullU | Eigen::ComputeFullV);
      const auto& s = svd.singularValues();
      const double cut = 1e-10 * s(0);
      for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s(i) <= cut) break;
        f += svd.matrixV().col(i) * (svd.matrixU().col(i).dot(v) / s(i));
      }
    }
    resid2 += (g * f - v).squaredNorm();
    const auto xi = op.torus().frequency(k);
    grad2 += (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]) * f.squaredNorm();
    for (int c = 0; c < n; ++c) fhat.at(k, c) = f(c);
  }
  const double rel = total2 > 0 ? std::sqrt(resid2 / total2) : 0.0;
  if (rel > tol) {
    std::ostringstream msg;
    msg << "input has a component outside R(Gamma) (relative residual " << rel << ")";
    throw SolveError(msg.str());
  }
  // unitary transform: grid L^2 = sqrt(h^n) * coefficient norm
  const double w = std::sqrt(op.torus().cell_volume());
  return {inverse_transform(fhat), w * std::sqrt(grad2), rel};
}

}  // namespace hodgelab
