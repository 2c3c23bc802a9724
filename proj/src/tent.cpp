#include "hodgelab/tent.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <ostream>

namespace hodgelab {

// --- time grid ----------------------------------------------------------------------

TimeGrid::TimeGrid(std::vector<double> t, double ratio) : t_(std::move(t)), ratio_(ratio) {
  const std::size_t k = t_.size();
  w_.assign(k, 0.0);
  for (std::size_t i = 0; i + 1 < k; ++i) {
    const double d = std::log(t_[i + 1] / t_[i]);
    w_[i] += 0.5 * d;
    w_[i + 1] += 0.5 * d;
  }
}

TimeGrid TimeGrid::geometric(double t_min, double t_max, double ratio) {
  if (!(t_min > 0 && t_max > t_min)) throw TentError("time window must satisfy 0 < t_min < t_max");
  if (!(ratio > 1)) throw TentError("time grid ratio must exceed 1");
  const long steps = std::lround(std::log(t_max / t_min) / std::log(ratio));
  if (steps < 1) throw TentError("time grid needs at least two points");
  std::vector<double> t(steps + 1);
  for (long i = 0; i <= steps; ++i) t[i] = t_min * std::pow(ratio, static_cast<double>(i));
  return TimeGrid(std::move(t), ratio);
}

TimeGrid TimeGrid::standard(const Torus& torus) {
  // [4h, l/8] when it spans at least one octave (m >= 64); coarser grids keep the
  // window inside [h, l/4] and widen it to at least one octave.
  const double h = torus.spacing(), l = torus.period();
  const double t_min = 4.0 * h <= l / 16.0 ? 4.0 * h : std::max(h, l / 32.0);
  const double t_max = std::max(l / 8.0, 2.0 * t_min);
  if (t_max > l / 4.0 * (1 + 1e-12)) throw TentError("grid too coarse for the standard time window");
  return geometric(t_min, t_max);
}

// --- tent fields ----------------------------------------------------------------------

TentField::TentField(TimeGrid grid, Torus torus, int fiber)
    : grid_(std::move(grid)), torus_(torus), fiber_(fiber) {
  slices_.assign(grid_.size(), Field(torus_, fiber_));
}

TentField::TentField(TimeGrid grid, std::vector<Field> slices)
    : grid_(std::move(grid)),
      torus_(slices.empty() ? Torus(1, 4) : slices.front().torus()),
      fiber_(slices.empty() ? 1 : slices.front().fiber_dim()),
      slices_(std::move(slices)) {
  if (slices_.size() != grid_.size()) throw TentError("slice count differs from the time grid");
  for (const Field& f : slices_)
    if (f.torus() != torus_ || f.fiber_dim() != fiber_)
      throw TentError("inconsistent slice shapes");
}

TentField& TentField::operator+=(const TentField& o) {
  if (!(grid_ == o.grid_) || o.size() != size()) throw TentError("tent field shape mismatch");
  for (std::size_t i = 0; i < size(); ++i) slices_[i] += o.slices_[i];
  return *this;
}

TentField& TentField::operator-=(const TentField& o) {
  if (!(grid_ == o.grid_) || o.size() != size()) throw TentError("tent field shape mismatch");
  for (std::size_t i = 0; i < size(); ++i) slices_[i] -= o.slices_[i];
  return *this;
}

TentField& TentField::operator*=(cplx s) {
  for (Field& f : slices_) f *= s;
  return *this;
}

std::vector<std::vector<double>> TentField::magnitudes() const {
  std::vector<std::vector<double>> out(size());
  for (std::size_t i = 0; i < size(); ++i) {
    out[i].resize(torus_.num_points());
    for (std::size_t x = 0; x < torus_.num_points(); ++x) out[i][x] = slices_[i].pointwise_norm(x);
  }
  return out;
}

// --- balls ------------------------------------------------------------------------------

double unit_ball_volume(int n) { return std::pow(M_PI, 0.5 * n) / std::tgamma(0.5 * n + 1.0); }

namespace {

struct OffsetTable {
  std::vector<Coord> deltas;       // sorted by distance, then lexicographically
  std::vector<long> dist2;         // squared distance in grid units
  std::vector<std::size_t> shell_end;  // exclusive end index of each equal-distance shell
};

const OffsetTable& offset_table(const Torus& torus) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, OffsetTable> cache;
  std::lock_guard<std::mutex> lock(mu);
  const auto key = std::make_pair(torus.dim(), torus.points_per_axis());
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  OffsetTable tab;
  const int m = torus.points_per_axis(), n = torus.dim();
  for (std::size_t i = 0; i < torus.num_points(); ++i) {
    Coord c = torus.coord(i);
    Coord d{0, 0, 0};
    long r2 = 0;
    for (int a = 0; a < n; ++a) {
      d[a] = torus.signed_mode(c[a]);
      r2 += static_cast<long>(d[a]) * d[a];
    }
    (void)m;
    tab.deltas.push_back(d);
    tab.dist2.push_back(r2);
  }
  std::vector<std::size_t> order(tab.deltas.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (tab.dist2[a] != tab.dist2[b]) return tab.dist2[a] < tab.dist2[b];
    return tab.deltas[a] < tab.deltas[b];
  });
  OffsetTable sorted;
  for (std::size_t k : order) {
    sorted.deltas.push_back(tab.deltas[k]);
    sorted.dist2.push_back(tab.dist2[k]);
  }
  for (std::size_t k = 0; k < sorted.deltas.size(); ++k)
    if (k + 1 == sorted.deltas.size() || sorted.dist2[k + 1] != sorted.dist2[k])
      sorted.shell_end.push_back(k + 1);
  return cache.emplace(key, std::move(sorted)).first->second;
}

// Neighbour index of x shifted by d (m is a power of two).
inline std::size_t shifted(const Torus& torus, const Coord& cx, const Coord& d) {
  const int m = torus.points_per_axis();
  const int mask = m - 1;
  std::size_t idx = 0;
  for (int a = 0; a < torus.dim(); ++a)
    idx = idx * m + static_cast<std::size_t>((cx[a] + d[a]) & mask);
  return idx;
}

// Neighbour lists: nbr[x * len + k] for the first `len` sorted offsets.
std::vector<std::size_t> neighbour_table(const Torus& torus, const OffsetTable& tab,
                                         std::size_t len) {
  std::vector<std::size_t> nbr(torus.num_points() * len);
  for (std::size_t x = 0; x < torus.num_points(); ++x) {
    const Coord cx = torus.coord(x);
    for (std::size_t k = 0; k < len; ++k) nbr[x * len + k] = shifted(torus, cx, tab.deltas[k]);
  }
  return nbr;
}

// Prefix weights of the volume-exact ball of radius r.
std::vector<double> ball_weights(const Torus& torus, double radius) {
  if (!(radius > 0)) throw TentError("ball radius must be positive");
  const OffsetTable& tab = offset_table(torus);
  const double cells = unit_ball_volume(torus.dim()) * std::pow(radius / torus.spacing(), torus.dim());
  if (cells > static_cast<double>(tab.deltas.size()))
    throw TentError("aperture window overflow: ball of radius " + std::to_string(radius) +
                    " exceeds the torus");
  std::vector<double> w;
  std::size_t start = 0;
  double filled = 0.0;
  for (std::size_t end : tab.shell_end) {
    const double count = static_cast<double>(end - start);
    if (filled + count <= cells) {
      w.insert(w.end(), end - start, 1.0);
      filled += count;
    } else {
      const double frac = (cells - filled) / count;
      if (frac > 0) w.insert(w.end(), end - start, frac);
      break;
    }
    start = end;
    if (filled == cells) break;
  }
  return w;
}

double max_radius_check(const TentField& f, double alpha) {
  if (!(alpha >= 1.0)) throw TentError("aperture must be >= 1");
  const double r = alpha * f.grid().t_max();
  if (r > 0.5 * f.torus().period() * (1 + 1e-12))
    throw TentError("aperture window overflow: alpha t_max exceeds period/2");
  return r;
}

std::vector<std::vector<double>> powered(const TentField& f, double q) {
  auto mags = f.magnitudes();
  if (q != 1.0)
    for (auto& row : mags)
      for (double& v : row) v = std::pow(v, q);
  return mags;
}

}  // namespace

BallStencil ball_stencil(const Torus& torus, double radius) {
  const OffsetTable& tab = offset_table(torus);
  BallStencil s;
  s.weights = ball_weights(torus, radius);
  const int m = torus.points_per_axis();
  for (std::size_t k = 0; k < s.weights.size(); ++k) {
    s.deltas.push_back(tab.deltas[k]);
    std::ptrdiff_t lin = 0;
    for (int a = 0; a < torus.dim(); ++a) lin = lin * m + tab.deltas[k][a];
    s.offsets.push_back(lin);
  }
  double total = 0.0;
  for (double w : s.weights) total += w;
  s.volume = total * torus.cell_volume();
  return s;
}

// --- norms ------------------------------------------------------------------------------

double tent_norm(const TentField& f, double p, double alpha, double q) {
  if (!(p >= 1.0)) throw TentError("tent norm needs p >= 1");
  if (!(q >= 1.0 && std::isfinite(q))) throw TentError("tent norm needs finite q >= 1");
  max_radius_check(f, alpha);
  const Torus& torus = f.torus();
  const OffsetTable& tab = offset_table(torus);
  const int n = torus.dim();
  const double hn = torus.cell_volume();
  std::vector<std::vector<double>> ws;
  std::size_t len = 0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    ws.push_back(ball_weights(torus, alpha * f.grid().t(i)));
    len = std::max(len, ws.back().size());
  }
  const auto nbr = neighbour_table(torus, tab, len);
  const auto mag = powered(f, q);
  double outer = 0.0;
  for (std::size_t x = 0; x < torus.num_points(); ++x) {
    double inner = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      const auto& w = ws[i];
      const auto& row = mag[i];
      const std::size_t* nb = &nbr[x * len];
      double s = 0.0;
      for (std::size_t k = 0; k < w.size(); ++k) s += w[k] * row[nb[k]];
      inner += f.grid().weight(i) * std::pow(f.grid().t(i), -n) * hn * s;
    }
    if (std::isinf(p))
      outer = std::max(outer, std::pow(inner, 1.0 / q));
    else
      outer += hn * std::pow(inner, p / q);
  }
  return std::isinf(p) ? outer : std::pow(outer, 1.0 / p);
}

double carleson_norm(const TentField& f, double q) {
  if (!(q >= 1.0 && std::isfinite(q))) throw TentError("Carleson norm needs finite q >= 1");
  const Torus& torus = f.torus();
  const OffsetTable& tab = offset_table(torus);
  const int n = torus.dim();
  const double hn = torus.cell_volume();
  const auto mag = powered(f, q);
  std::vector<double> cumulative(torus.num_points(), 0.0);
  double best = 0.0;
  for (std::size_t j = 0; j < f.size(); ++j) {
    if (j > 0) {
      const double d = std::log(f.grid().t(j) / f.grid().t(j - 1));
      for (std::size_t y = 0; y < torus.num_points(); ++y)
        cumulative[y] += 0.5 * d * (mag[j - 1][y] + mag[j][y]);
    }
    const double r = f.grid().t(j);
    if (r > 0.5 * torus.period()) break;
    const auto w = ball_weights(torus, r);
    for (std::size_t x = 0; x < torus.num_points(); ++x) {
      const Coord cx = torus.coord(x);
      double s = 0.0;
      for (std::size_t k = 0; k < w.size(); ++k) s += w[k] * cumulative[shifted(torus, cx, tab.deltas[k])];
      best = std::max(best, std::pow(r, -n) * hn * s);
    }
  }
  return std::pow(best, 1.0 / q);
}

namespace {

std::vector<double> cone_sup(const TentField& f, double alpha) {
  max_radius_check(f, alpha);
  const Torus& torus = f.torus();
  const OffsetTable& tab = offset_table(torus);
  std::vector<std::vector<double>> ws;
  std::size_t len = 0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    ws.push_back(ball_weights(torus, alpha * f.grid().t(i)));
    len = std::max(len, ws.back().size());
  }
  const auto nbr = neighbour_table(torus, tab, len);
  const auto mag = f.magnitudes();
  std::vector<double> sup(torus.num_points(), 0.0);
  for (std::size_t x = 0; x < torus.num_points(); ++x) {
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i)
      for (std::size_t k = 0; k < ws[i].size(); ++k) s = std::max(s, mag[i][nbr[x * len + k]]);
    sup[x] = s;
  }
  return sup;
}

double scalar_lp(const std::vector<double>& v, const Torus& torus, double p) {
  if (std::isinf(p)) return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
  double acc = 0.0;
  for (double a : v) acc += std::pow(a, p);
  return std::pow(torus.cell_volume() * acc, 1.0 / p);
}

}  // namespace

double nontangential_norm(const TentField& f, double p, double alpha) {
  if (!(p >= 1.0)) throw TentError("non-tangential norm needs p >= 1");
  return scalar_lp(cone_sup(f, alpha), f.torus(), p);
}

double vertical_norm(const TentField& f, double p) {
  if (!(p >= 1.0)) throw TentError("vertical norm needs p >= 1");
  const Torus& torus = f.torus();
  std::vector<double> g(torus.num_points(), 0.0);
  for (std::size_t i = 0; i < f.size(); ++i)
    for (std::size_t x = 0; x < torus.num_points(); ++x) {
      const double a = f.slice(i).pointwise_norm(x);
      g[x] += f.grid().weight(i) * a * a;
    }
  for (double& v : g) v = std::sqrt(v);
  return scalar_lp(g, torus, p);
}

// --- dyadic averaging ----------------------------------------------------------------

int dyadic_level(const Torus& torus, double t) {
  if (!(t > 0)) throw TentError("dyadic averaging needs t > 0");
  const double ratio = t / torus.spacing();
  int j = static_cast<int>(std::ceil(std::log2(ratio) - 1e-12));
  if (j < 0) j = 0;
  if ((1L << j) > torus.points_per_axis())
    throw TentError("t = " + std::to_string(t) + " beyond the dyadic range of the torus");
  return j;
}

Field dyadic_average(const Field& u, double t) {
  const Torus& torus = u.torus();
  const int j = dyadic_level(torus, t);
  const auto cubes = dyadic_cubes(torus, j);
  const int n = u.fiber_dim();
  std::vector<cplx> sums(cubes.size() * n, 0.0);
  std::vector<double> counts(cubes.size(), 0.0);
  std::vector<std::size_t> owner(torus.num_points());
  for (std::size_t x = 0; x < torus.num_points(); ++x) {
    owner[x] = dyadic_cube_of(torus, j, x);
    counts[owner[x]] += 1.0;
    for (int c = 0; c < n; ++c) sums[owner[x] * n + c] += u.at(x, c);
  }
  Field out = u.zeros_like();
  for (std::size_t x = 0; x < torus.num_points(); ++x)
    for (int c = 0; c < n; ++c) out.at(x, c) = sums[owner[x] * n + c] / counts[owner[x]];
  return out;
}

// --- principal part ---------------------------------------------------------------------

TentField PrincipalPart::column(int k) const {
  std::vector<Field> slices;
  for (const MatrixField& g : gamma) {
    const int n = g.rows();
    Field f(g.torus(), n);
    for (std::size_t x = 0; x < g.torus().num_points(); ++x)
      for (int r = 0; r < n; ++r) f.at(x, r) = g.at(x)(r, k);
    slices.push_back(std::move(f));
  }
  return TentField(grid, std::move(slices));
}

PrincipalPart principal_part(const ResolventPlan& plan, const TimeGrid& grid) {
  const Torus& torus = plan.op().torus();
  const int n = plan.op().fiber_dim();
  PrincipalPart out{grid, {}};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    MatrixField g(torus, n);
    for (int k = 0; k < n; ++k) {
      std::vector<cplx> e(n, 0.0);
      e[k] = 1.0;
      const Field col = q_t(plan, grid.t(i), Field::constant(torus, e));
      for (std::size_t x = 0; x < torus.num_points(); ++x)
        for (int r = 0; r < n; ++r) g.at(x)(r, k) = col.at(x, r);
    }
    out.gamma.push_back(std::move(g));
  }
  return out;
}

PrincipalSplit principal_split(const ResolventPlan& plan, const PrincipalPart& gamma,
                               const Field& u, int n_tilde) {
  if (n_tilde < 1) throw TentError("principal split needs N >= 1");
  const TimeGrid& grid = gamma.grid;
  const ResolventPlan& un = plan.unperturbed();
  std::vector<Field> full, principal, approx;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double t = grid.t(i);
    const Field v = p_t_power(un, t, n_tilde, u);
    Field fu = q_t(plan, t, v);
    const Field av = gamma.gamma[i].apply(dyadic_average(v, t));
    approx.push_back(fu - av);
    full.push_back(std::move(fu));
    principal.push_back(av);
  }
  return {TentField(grid, std::move(full)), TentField(grid, std::move(approx)),
          TentField(grid, std::move(principal))};
}

// --- Schur operators -------------------------------------------------------------------

SeparableKernel identity_kernel() {
  auto id = [](std::size_t, const Field& f) { return f; };
  return {id, id, id, id};
}

SeparableKernel high_frequency_kernel(const ResolventPlan& plan, const TimeGrid& grid,
                                      int n_tilde) {
  if (n_tilde < 1) throw TentError("kernel needs N >= 1");
  const ResolventPlan* un = &plan.unperturbed();
  auto left = [un, grid, n_tilde](std::size_t i, const Field& f) {
    return f - p_t_power(*un, grid.t(i), n_tilde, f);
  };
  auto right = [un, grid, n_tilde](std::size_t j, const Field& f) {
    const double s = grid.t(j);
    const Field g = n_tilde > 1 ? q_t_power(*un, s, n_tilde - 1, f) : f;
    return p_t(*un, s, g);
  };
  // the unperturbed P_t and Q_t are self-adjoint
  return {left, right, left, right};
}

namespace {

cplx schur_weight(const TimeGrid& g, std::size_t i, std::size_t j, SchurVariant v, cplx z) {
  if (i == j) return 0.5;
  const double lt = std::log(g.t(i) / g.t(j));  // ln(t/s)
  if (v == SchurVariant::minus) return j > i ? std::exp(z * lt) : cplx(0.0);   // (t/s)^z, s > t
  return j < i ? std::exp(-z * lt) : cplx(0.0);                                // (s/t)^z, t > s
}

}  // namespace

TentField schur_apply(const SeparableKernel& k, SchurVariant v, cplx z, const TentField& f) {
  const TimeGrid& g = f.grid();
  std::vector<Field> rf;
  for (std::size_t j = 0; j < f.size(); ++j) rf.push_back(k.right(j, f.slice(j)));
  std::vector<Field> out;
  for (std::size_t i = 0; i < f.size(); ++i) {
    Field acc = f.slice(i).zeros_like();
    for (std::size_t j = 0; j < f.size(); ++j) {
      const cplx c = g.weight(j) * schur_weight(g, i, j, v, z);
      if (c != cplx(0.0)) acc += c * rf[j];
    }
    out.push_back(k.left(i, acc));
  }
  return TentField(g, std::move(out));
}

TentField schur_apply_adjoint(const SeparableKernel& k, SchurVariant v, cplx z,
                              const TentField& gf) {
  const TimeGrid& g = gf.grid();
  std::vector<Field> lg;
  for (std::size_t i = 0; i < gf.size(); ++i) lg.push_back(k.left_adjoint(i, gf.slice(i)));
  std::vector<Field> out;
  for (std::size_t j = 0; j < gf.size(); ++j) {
    Field acc = gf.slice(j).zeros_like();
    for (std::size_t i = 0; i < gf.size(); ++i) {
      const cplx c = g.weight(i) * std::conj(schur_weight(g, i, j, v, z));
      if (c != cplx(0.0)) acc += c * lg[i];
    }
    out.push_back(k.right_adjoint(j, acc));
  }
  return TentField(g, std::move(out));
}

TentField schur_apply(const std::function<Field(std::size_t, std::size_t, const Field&)>& k,
                      SchurVariant v, cplx z, const TentField& f) {
  const TimeGrid& g = f.grid();
  std::vector<Field> out;
  for (std::size_t i = 0; i < f.size(); ++i) {
    Field acc = f.slice(i).zeros_like();
    for (std::size_t j = 0; j < f.size(); ++j) {
      const cplx c = g.weight(j) * schur_weight(g, i, j, v, z);
      if (c != cplx(0.0)) acc += c * k(i, j, f.slice(j));
    }
    out.push_back(std::move(acc));
  }
  return TentField(g, std::move(out));
}

namespace {

// L^2(dt/t; L^2) norm (T^{2,2} up to the constant c_n).
double weighted_norm(const TentField& f) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double a = lp_norm(f.slice(i), 2.0);
    s += f.grid().weight(i) * a * a;
  }
  return std::sqrt(s);
}

}  // namespace

NormEstimate schur_norm_estimate(const SeparableKernel& k, SchurVariant v, cplx z,
                                 const TimeGrid& grid, const Torus& torus, int fiber,
                                 std::uint64_t seed, int probes, int iterations) {
  NormEstimate est{0.0, 0.0, 0.0, 0};
  Rng root(seed, 0x5c4);
  TentField start(grid, torus, fiber);
  for (int p = 0; p < std::max(1, probes); ++p) {
    Rng rng = root.split(static_cast<std::uint64_t>(p));
    TentField f(grid, torus, fiber);
    for (std::size_t i = 0; i < grid.size(); ++i) f.slice(i) = random_bandlimited(torus, fiber, rng);
    const double r = weighted_norm(schur_apply(k, v, z, f)) / weighted_norm(f);
    est.probe_max = std::max(est.probe_max, r);
    if (p == 0) start = f;
  }
  TentField f = start;
  for (int it = 0; it < iterations; ++it) {
    const double nf = weighted_norm(f);
    if (nf == 0.0) break;
    f *= 1.0 / nf;
    const TentField tf = schur_apply(k, v, z, f);
    est.power = std::max(est.power, weighted_norm(tf));
    f = schur_apply_adjoint(k, v, z, tf);
    est.iterations = it + 1;
  }
  est.estimate = std::max(est.power, est.probe_max);
  return est;
}

// --- factorisation -----------------------------------------------------------------------

TentField random_tent_bumps(const TimeGrid& grid, const Torus& torus, int fiber, Rng& rng,
                            int bumps) {
  struct Bump {
    double log_t, sigma_t, sigma_x;
    std::array<double, 3> centre;
    std::vector<cplx> amp;
  };
  const double lo = std::log(grid.t_min()), hi = std::log(grid.t_max());
  const double ell = torus.period();
  std::vector<Bump> bs;
  for (int b = 0; b < bumps; ++b) {
    Bump bump;
    bump.log_t = rng.uniform(lo, hi);
    bump.sigma_t = rng.uniform(0.3, 1.0);
    bump.sigma_x = ell * rng.uniform(1.0 / 40.0, 1.0 / 10.0);
    for (int a = 0; a < 3; ++a) bump.centre[a] = rng.uniform(0.0, ell);
    for (int c = 0; c < fiber; ++c) bump.amp.push_back(rng.complex_normal());
    bs.push_back(std::move(bump));
  }
  TentField f(grid, torus, fiber);
  const double h = torus.spacing();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double lt = std::log(grid.t(i));
    for (std::size_t x = 0; x < torus.num_points(); ++x) {
      const Coord c = torus.coord(x);
      for (const Bump& b : bs) {
        double d2 = 0.0;
        for (int a = 0; a < torus.dim(); ++a) {
          double d = std::fabs(c[a] * h - b.centre[a]);
          d = std::min(d, ell - d);
          d2 += d * d;
        }
        const double g = std::exp(-0.5 * (lt - b.log_t) * (lt - b.log_t) / (b.sigma_t * b.sigma_t) -
                                  0.5 * d2 / (b.sigma_x * b.sigma_x));
        for (int k = 0; k < fiber; ++k) f.slice(i).at(x, k) += g * b.amp[k];
      }
    }
  }
  return f;
}

FactorizationResult factorization_check(const TentField& f, const TentField& g, double p,
                                        double q) {
  if (!(f.grid() == g.grid()) || f.torus() != g.torus())
    throw TentError("factorization check needs fields on the same grids");
  TentField prod(f.grid(), f.torus(), 1);
  for (std::size_t i = 0; i < f.size(); ++i)
    for (std::size_t x = 0; x < f.torus().num_points(); ++x)
      prod.slice(i).at(x, 0) = f.slice(i).pointwise_norm(x) * g.slice(i).pointwise_norm(x);
  FactorizationResult r;
  r.lhs = tent_norm(prod, p, 1.0, q);
  r.f_norm = nontangential_norm(f, p);
  r.g_norm = carleson_norm(g, q);
  r.ratio = r.lhs == 0.0 ? 0.0 : r.lhs / (r.f_norm * r.g_norm);
  return r;
}

Field maximal_function(const Field& u, const TimeGrid& grid, double q) {
  const Torus& torus = u.torus();
  const OffsetTable& tab = offset_table(torus);
  std::vector<double> mag(torus.num_points());
  for (std::size_t x = 0; x < torus.num_points(); ++x) mag[x] = std::pow(u.pointwise_norm(x), q);
  Field out(torus, 1);
  std::vector<std::vector<double>> ws;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (grid.t(i) <= 0.5 * torus.period()) ws.push_back(ball_weights(torus, grid.t(i)));
  for (std::size_t x = 0; x < torus.num_points(); ++x) {
    const Coord cx = torus.coord(x);
    double best = mag[x];
    for (const auto& w : ws) {
      double s = 0.0, tot = 0.0;
      for (std::size_t k = 0; k < w.size(); ++k) {
        s += w[k] * mag[shifted(torus, cx, tab.deltas[k])];
        tot += w[k];
      }
      best = std::max(best, s / tot);
    }
    out.at(x, 0) = std::pow(best, 1.0 / q);
  }
  return out;
}

NontangentialResult nontangential_max(const Field& u,
                                      const std::function<Field(double, const Field&)>& family,
                                      const TimeGrid& grid, double p) {
  std::vector<Field> slices;
  for (std::size_t i = 0; i < grid.size(); ++i)
    slices.push_back(dyadic_average(family(grid.t(i), u), grid.t(i)));
  const TentField f(grid, std::move(slices));
  const double q = std::max(1.0, p / 2.0);
  return {nontangential_norm(f, p), lp_norm(maximal_function(u, grid, q), p)};
}

double calderon_constant(int n_tilde) {
  if (n_tilde < 1) throw TentError("Calderon constant needs N >= 1");
  // s = ln tau: (tau/(1+tau^2))^{2N} = (2 cosh s)^{-2N}; the integrand is analytic
  // and decays exponentially, so the trapezoid rule converges geometrically.
  const double ds = 1.0 / 64.0;
  double sum = 0.0;
  for (int k = -64 * 60; k <= 64 * 60; ++k)
    sum += std::pow(2.0 * std::cosh(k * ds), -2.0 * n_tilde);
  return 1.0 / (sum * ds);
}

void write_tent_csv(std::ostream& os, const TentField& f) {
  const Torus& t = f.torus();
  os << "K,n,m,period,N\n"
     << f.size() << ',' << t.dim() << ',' << t.points_per_axis() << ',' << t.period() << ','
     << f.fiber_dim() << '\n';
  os.precision(17);
  for (std::size_t i = 0; i < f.size(); ++i) os << (i ? "," : "") << f.grid().t(i);
  os << '\n';
  for (std::size_t i = 0; i < f.size(); ++i) write_field_csv(os, f.slice(i));
}

}  // namespace hodgelab
