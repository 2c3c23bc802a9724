#include "hodgelab/dirac.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hodgelab {

// --- DiracSymbol -------------------------------------------------------------

DiracSymbol::DiracSymbol(int dim, std::vector<Matrix> generators)
    : dim_(dim), fiber_(0), gens_(std::move(generators)) {
  if (dim < 1 || dim > 3) throw DiracError("symbol dimension must be 1, 2 or 3");
  if (static_cast<int>(gens_.size()) != dim)
    throw DiracError("need exactly one generator per space dimension");
  fiber_ = static_cast<int>(gens_.front().rows());
  for (const Matrix& g : gens_)
    if (g.rows() != fiber_ || g.cols() != fiber_)
      throw DiracError("generators must be square and of equal size");
  if (fiber_ < 1) throw DiracError("empty generator matrices");
}

Matrix DiracSymbol::gamma_hat(const std::array<double, 3>& xi) const {
  Matrix s = Matrix::Zero(fiber_, fiber_);
  for (int j = 0; j < dim_; ++j) s += gens_[j] * xi[j];
  return s;
}

Matrix DiracSymbol::pi_hat(const std::array<double, 3>& xi) const {
  Matrix g = gamma_hat(xi);
  return g + g.adjoint();
}

DiracSymbol DiracSymbol::adjoint() const {
  std::vector<Matrix> adj;
  adj.reserve(gens_.size());
  for (const Matrix& g : gens_) adj.push_back(g.adjoint());
  return DiracSymbol(dim_, std::move(adj));
}

double DiracSymbol::nilpotency_defect() const {
  double worst = 0.0;
  for (int j = 0; j < dim_; ++j)
    for (int k = j; k < dim_; ++k)
      worst = std::max(worst, (gens_[j] * gens_[k] + gens_[k] * gens_[j]).norm());
  return worst;
}

bool DiracSymbol::is_zero() const {
  return std::all_of(gens_.begin(), gens_.end(), [](const Matrix& g) { return g.norm() == 0.0; });
}

void check_nilpotency(const DiracSymbol& sym, double tol) {
  const double d = sym.nilpotency_defect();
  if (d > tol)
    throw AuditError("nilpotency", "generator anticommutator norm " + std::to_string(d));
}

CoercivityReport coercivity_audit(const DiracSymbol& sym, const Torus& torus, double tol) {
  if (sym.dim() != torus.dim()) throw DiracError("symbol and torus dimensions differ");
  CoercivityReport rep{std::numeric_limits<double>::infinity(), true, {0.0, 0.0, 0.0}};
  for (std::size_t k = 0; k < torus.num_points(); ++k) {
    const auto xi = torus.frequency(k);
    const double mag = std::sqrt(xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]);
    if (mag == 0.0) continue;
    Eigen::JacobiSVD<Matrix> svd(sym.pi_hat(xi));
    const auto& s = svd.singularValues();
    const double smax = s.size() ? s(0) : 0.0;
    if (smax == 0.0) continue;
    const double cutoff = 1e-10 * smax;
    double smin = smax;
    for (Eigen::Index i = 0; i < s.size(); ++i)
      if (s(i) > cutoff) smin = std::min(smin, s(i));
    const double kappa = smin / mag;
    rep.vacuous = false;
    if (kappa < rep.kappa) {
      rep.kappa = kappa;
      rep.worst_xi = xi;
    }
  }
  if (!rep.vacuous && rep.kappa <= tol) {
    std::string where = "(";
    for (int a = 0; a < torus.dim(); ++a)
      where += (a ? ", " : "") + std::to_string(rep.worst_xi[a]);
    throw AuditError("coercivity", "coercivity violated at xi = " + where + ")");
  }
  return rep;
}

// --- MatrixField -----------------------------------------------------------------

MatrixField::MatrixField(Torus torus, int n) : torus_(torus), n_(n) {
  if (n < 1) throw DiracError("matrix field size must be >= 1");
  data_.assign(torus_.num_points() * n * n, cplx(0.0, 0.0));
}

MatrixField MatrixField::identity(const Torus& torus, int n) {
  MatrixField m(torus, n);
  for (std::size_t x = 0; x < torus.num_points(); ++x) m.at(x).setIdentity();
  return m;
}

MatrixField MatrixField::scalar(const Field& a, int n) {
  if (a.fiber_dim() != 1) throw DiracError("scalar coefficient must have fiber 1");
  MatrixField m(a.torus(), n);
  for (std::size_t x = 0; x < a.torus().num_points(); ++x) {
    m.at(x).setIdentity();
    m.at(x) *= a.at(x, 0);
  }
  return m;
}

double MatrixField::sup_norm() const {
  double s = 0.0;
  for (std::size_t x = 0; x < torus_.num_points(); ++x) {
    Eigen::JacobiSVD<Matrix> svd(Matrix(at(x)));
    s = std::max(s, svd.singularValues()(0));
  }
  return s;
}

Field MatrixField::apply(const Field& u) const {
  if (u.torus() != torus_ || u.fiber_dim() != n_)
    throw DiracError("dimension mismatch in coefficient multiplication");
  Field out(torus_, n_);
  for (std::size_t x = 0; x < torus_.num_points(); ++x) {
    const cplx* m = data_.data() + x * n_ * n_;
    for (int i = 0; i < n_; ++i) {
      cplx s(0.0, 0.0);
      for (int j = 0; j < n_; ++j) s += m[i * n_ + j] * u.at(x, j);
      out.at(x, i) = s;
    }
  }
  return out;
}

MatrixField MatrixField::adjoint() const {
  MatrixField m(torus_, n_);
  for (std::size_t x = 0; x < torus_.num_points(); ++x) m.at(x) = at(x).adjoint();
  return m;
}

MatrixField MatrixField::embed(const MatrixField& block, int n, int offset) {
  if (offset < 0 || offset + block.rows() > n) throw DiracError("block does not fit");
  MatrixField m(block.torus(), n);
  for (std::size_t x = 0; x < block.torus().num_points(); ++x)
    m.at(x).block(offset, offset, block.rows(), block.rows()) = block.at(x);
  return m;
}

double pointwise_accretivity(const MatrixField& m) {
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t x = 0; x < m.torus().num_points(); ++x) {
    Matrix h = 0.5 * (Matrix(m.at(x)) + Matrix(m.at(x)).adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
    worst = std::min(worst, es.eigenvalues()(0));
  }
  return worst;
}

namespace {

// rho with sup-norm exactly `amplitude` (per point operator norm)
MatrixField scale_perturbation(std::vector<Matrix> rho, const Torus& torus, int n,
                               double amplitude) {
  double sup = 0.0;
  for (const Matrix& r : rho) {
    Eigen::JacobiSVD<Matrix> svd(r);
    sup = std::max(sup, svd.singularValues()(0));
  }
  const double scale = sup > 0.0 ? amplitude / sup : 0.0;
  MatrixField b = MatrixField::identity(torus, n);
  for (std::size_t x = 0; x < torus.num_points(); ++x) b.at(x) += scale * rho[x];
  return b;
}

std::vector<cplx> random_entries(const Torus& torus, int count, Roughness kind, Rng& rng,
                                 int band) {
  std::vector<cplx> v(torus.num_points() * count);
  if (kind == Roughness::rough) {
    for (cplx& z : v) z = rng.complex_normal();
  } else {
    Field f = random_bandlimited(torus, count, rng, band);
    v = f.values();
  }
  return v;
}

}  // namespace

MatrixField random_accretive(const Torus& torus, int n, double amplitude, Roughness kind,
                             Rng& rng, int band) {
  const auto v = random_entries(torus, n * n, kind, rng, band);
  std::vector<Matrix> rho(torus.num_points(), Matrix(n, n));
  for (std::size_t x = 0; x < torus.num_points(); ++x)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) rho[x](i, j) = v[x * n * n + i * n + j];
  return scale_perturbation(std::move(rho), torus, n, amplitude);
}

MatrixField random_accretive_diagonal(const Torus& torus, int n, double amplitude,
                                      Roughness kind, Rng& rng, int band) {
  const auto v = random_entries(torus, n, kind, rng, band);
  std::vector<Matrix> rho(torus.num_points(), Matrix::Zero(n, n));
  for (std::size_t x = 0; x < torus.num_points(); ++x)
    for (int i = 0; i < n; ++i) rho[x](i, i) = v[x * n + i];
  return scale_perturbation(std::move(rho), torus, n, amplitude);
}

// --- PerturbedDirac ----------------------------------------------------------------

PerturbedDirac::PerturbedDirac(DiracSymbol symbol, Torus torus, std::optional<MatrixField> b1,
                               std::optional<MatrixField> b2, std::string name)
    : symbol_(std::move(symbol)),
      torus_(torus),
      b1_(std::move(b1)),
      b2_(std::move(b2)),
      name_(std::move(name)) {
  if (symbol_.dim() != torus_.dim()) throw DiracError("symbol and torus dimensions differ");
  for (const auto* b : {&b1_, &b2_}) {
    if (!*b) continue;
    if ((*b)->torus() != torus_ || (*b)->rows() != symbol_.fiber_dim())
      throw DiracError("coefficient field does not match operator dimensions");
    if (!std::isfinite((*b)->sup_norm())) throw DiracError("coefficient field is not bounded");
  }
  gamma_table_.reserve(torus_.num_points());
  for (std::size_t k = 0; k < torus_.num_points(); ++k)
    gamma_table_.push_back(symbol_.gamma_hat(torus_.frequency(k)));
}

Field PerturbedDirac::apply_symbol(const Field& u, bool adjoint_symbol, bool add_adjoint) const {
  if (u.torus() != torus_ || u.fiber_dim() != fiber_dim())
    throw DiracError("dimension mismatch applying operator");
  const int n = fiber_dim();
  Field hat = forward_transform(u);
  Vector in(n), out(n);
  for (std::size_t k = 0; k < torus_.num_points(); ++k) {
    for (int c = 0; c < n; ++c) in(c) = hat.at(k, c);
    const Matrix& g = gamma_table_[k];
    if (add_adjoint)
      out = g * in + g.adjoint() * in;
    else if (adjoint_symbol)
      out = g.adjoint() * in;
    else
      out = g * in;
    for (int c = 0; c < n; ++c) hat.at(k, c) = out(c);
  }
  return inverse_transform(hat);
}

Field PerturbedDirac::apply_gamma(const Field& u) const { return apply_symbol(u, false); }
Field PerturbedDirac::apply_gamma_star(const Field& u) const { return apply_symbol(u, true); }
Field PerturbedDirac::apply_pi(const Field& u) const { return apply_symbol(u, false, true); }

Field PerturbedDirac::multiply_b1(const Field& u) const { return b1_ ? b1_->apply(u) : u; }
Field PerturbedDirac::multiply_b2(const Field& u) const { return b2_ ? b2_->apply(u) : u; }

Field PerturbedDirac::apply_gamma_star_b(const Field& u) const {
  return multiply_b1(apply_gamma_star(multiply_b2(u)));
}

Field PerturbedDirac::apply_pi_b(const Field& u) const {
  if (is_unperturbed()) return apply_pi(u);
  Field out = apply_gamma(u);
  out += apply_gamma_star_b(u);
  return out;
}

PerturbedDirac PerturbedDirac::underline() const {
  return PerturbedDirac(symbol_.adjoint(), torus_, b2_, b1_, name_ + "-underline");
}

PerturbedDirac PerturbedDirac::unperturbed() const {
  return PerturbedDirac(symbol_, torus_, std::nullopt, std::nullopt, name_ + "-unperturbed");
}

Matrix PerturbedDirac::dense_matrix() const {
  const std::size_t dim = total_dim();
  Matrix a(dim, dim);
  Field e(torus_, fiber_dim());
  for (std::size_t j = 0; j < dim; ++j) {
    e.values()[j] = 1.0;
    const Field col = apply_pi_b(e);
    for (std::size_t i = 0; i < dim; ++i) a(i, j) = col.values()[i];
    e.values()[j] = 0.0;
  }
  return a;
}

// --- audits --------------------------------------------------------------------------

namespace {

struct RangeStats {
  double kappa = std::numeric_limits<double>::infinity();
  double omega = 0.0;
  bool seen = false;
};

void accumulate(RangeStats& st, const Field& v, const Field& bv) {
  const double nv = std::real(inner(v, v));
  if (nv <= 1e-300) return;
  const cplx q = inner(v, bv);  // (Bv, v) with the grid pairing
  st.kappa = std::min(st.kappa, q.real() / nv);
  st.omega = std::max(st.omega, std::abs(std::arg(q)));
  st.seen = true;
}

}  // namespace

AccretivityReport accretivity_audit(const PerturbedDirac& op, int trials, std::uint64_t seed) {
  if (trials < 1) throw DiracError("accretivity audit needs at least one trial");
  RangeStats s1, s2;
  Rng root(seed, 0xacc);
  for (int k = 0; k < trials; ++k) {
    Rng rng = root.split(static_cast<std::uint64_t>(k));
    const Field u = random_bandlimited(op.torus(), op.fiber_dim(), rng);
    const Field v1 = op.apply_gamma_star(u);
    accumulate(s1, v1, op.multiply_b1(v1));
    const Field v2 = op.apply_gamma(u);
    accumulate(s2, v2, op.multiply_b2(v2));
  }
  AccretivityReport rep{s1.seen ? s1.kappa : 1.0, s2.seen ? s2.kappa : 1.0, s1.omega, s2.omega,
                        0.0};
  rep.omega = 0.5 * (rep.omega1 + rep.omega2);
  if (rep.kappa1 <= 0.0 || rep.kappa2 <= 0.0)
    throw AuditError("accretivity", "perturbation not accretive on sampled range (kappa1 = " +
                                        std::to_string(rep.kappa1) +
                                        ", kappa2 = " + std::to_string(rep.kappa2) + ")");
  if (rep.omega1 >= M_PI / 2 || rep.omega2 >= M_PI / 2)
    throw AuditError("accretivity", "accretivity angle reaches pi/2");
  return rep;
}

StructuralReport structural_audit(const PerturbedDirac& op, int trials, std::uint64_t seed) {
  StructuralReport rep{0.0, 0.0};
  Rng root(seed, 0x57c);
  for (int k = 0; k < trials; ++k) {
    Rng rng = root.split(static_cast<std::uint64_t>(k));
    const Field u = random_bandlimited(op.torus(), op.fiber_dim(), rng);
    const double nu = lp_norm(u, 2.0);
    const Field a = op.apply_gamma_star(op.multiply_b2(op.multiply_b1(op.apply_gamma_star(u))));
    const Field b = op.apply_gamma(op.multiply_b1(op.multiply_b2(op.apply_gamma(u))));
    rep.gamma_star_defect = std::max(rep.gamma_star_defect, lp_norm(a, 2.0) / nu);
    rep.gamma_defect = std::max(rep.gamma_defect, lp_norm(b, 2.0) / nu);
  }
  return rep;
}

// --- built-in families ------------------------------------------------------------------

DiracSymbol make_dirac1d_symbol() {
  Matrix g = Matrix::Zero(2, 2);
  g(1, 0) = 1.0;
  return DiracSymbol(1, {g});
}

DiracSymbol make_forms(int n) {
  if (n < 1 || n > 3) throw DiracError("forms are supported for n = 1, 2, 3");
  const int size = 1 << n;
  std::vector<Matrix> gens;
  for (int j = 0; j < n; ++j) {
    Matrix g = Matrix::Zero(size, size);
    // basis e_S indexed by bitmask S; dx_j ^ e_S = (-1)^{#(S below j)} e_{S+j}
    for (int s = 0; s < size; ++s) {
      if (s & (1 << j)) continue;
      const int below = __builtin_popcount(static_cast<unsigned>(s & ((1 << j) - 1)));
      g(s | (1 << j), s) = cplx(0.0, below % 2 ? -1.0 : 1.0);
    }
    gens.push_back(std::move(g));
  }
  return DiracSymbol(n, std::move(gens));
}

DiracSymbol make_gradient_symbol(int n) {
  std::vector<Matrix> gens;
  for (int j = 0; j < n; ++j) {
    Matrix g = Matrix::Zero(1 + n, 1 + n);
    g(1 + j, 0) = cplx(0.0, 1.0);
    gens.push_back(std::move(g));
  }
  return DiracSymbol(n, std::move(gens));
}

PerturbedDirac make_elliptic(const Field& a, const MatrixField& A, double min_ellipticity) {
  const Torus& t = a.torus();
  const int n = t.dim();
  if (a.fiber_dim() != 1) throw DiracError("elliptic coefficient a must be scalar");
  if (A.torus() != t || A.rows() != n) throw DiracError("elliptic matrix A must be n x n");
  double re_a = std::numeric_limits<double>::infinity();
  for (std::size_t x = 0; x < t.num_points(); ++x) re_a = std::min(re_a, a.at(x, 0).real());
  if (re_a < min_ellipticity)
    throw AuditError("ellipticity", "Re a >= kappa1 fails (min Re a = " + std::to_string(re_a) + ")");
  const double re_A = pointwise_accretivity(A);
  if (re_A < min_ellipticity)
    throw AuditError("ellipticity", "Re A >= kappa2 I fails (min = " + std::to_string(re_A) + ")");
  MatrixField b1(t, 1 + n), b2(t, 1 + n);
  for (std::size_t x = 0; x < t.num_points(); ++x) {
    b1.at(x)(0, 0) = a.at(x, 0);
    b2.at(x).block(1, 1, n, n) = A.at(x);
  }
  return PerturbedDirac(make_gradient_symbol(n), t, std::move(b1), std::move(b2),
                        "elliptic-" + std::to_string(n));
}

PerturbedDirac make_da(const DiracSymbol& d, const MatrixField& A) {
  const int n = d.fiber_dim();
  for (const Matrix& g : d.generators())
    if ((g - g.adjoint()).norm() > 1e-12) throw DiracError("D must have Hermitian generators");
  if (A.rows() != n || A.torus().dim() != d.dim()) throw DiracError("A must be N x N");
  std::vector<Matrix> gens;
  for (const Matrix& g : d.generators()) {
    Matrix big = Matrix::Zero(2 * n, 2 * n);
    big.block(n, 0, n, n) = g;
    gens.push_back(std::move(big));
  }
  const Torus& t = A.torus();
  MatrixField b1(t, 2 * n), b2(t, 2 * n);
  for (std::size_t x = 0; x < t.num_points(); ++x) {
    b1.at(x).block(0, 0, n, n) = A.at(x);
    b2.at(x).block(n, n, n, n) = A.at(x);
  }
  return PerturbedDirac(DiracSymbol(d.dim(), std::move(gens)), t, std::move(b1), std::move(b2),
                        "da");
}

}  // namespace hodgelab
