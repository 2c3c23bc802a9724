#include "hodgelab/lattice.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <tuple>

namespace hodgelab {

// --- Torus -------------------------------------------------------------------

Torus::Torus(int dim, int points_per_axis, double period)
    : dim_(dim), m_(points_per_axis), period_(period), num_points_(1) {
  if (dim < 1 || dim > 3) throw LatticeError("torus dimension must be 1, 2 or 3");
  if (points_per_axis < 4 || (points_per_axis & (points_per_axis - 1)) != 0)
    throw LatticeError("points per axis must be a power of two >= 4");
  if (!(period > 0.0) || !std::isfinite(period))
    throw LatticeError("period must be positive and finite");
  for (int a = 0; a < dim; ++a) num_points_ *= static_cast<std::size_t>(m_);
}

double Torus::volume() const noexcept { return std::pow(period_, dim_); }
double Torus::cell_volume() const noexcept { return std::pow(spacing(), dim_); }

Coord Torus::coord(std::size_t index) const noexcept {
  Coord c{0, 0, 0};
  for (int a = dim_ - 1; a >= 0; --a) {
    c[a] = static_cast<int>(index % m_);
    index /= m_;
  }
  return c;
}

std::size_t Torus::index(const Coord& c) const noexcept {
  std::size_t idx = 0;
  for (int a = 0; a < dim_; ++a) {
    int k = ((c[a] % m_) + m_) % m_;
    idx = idx * m_ + static_cast<std::size_t>(k);
  }
  return idx;
}

std::array<double, 3> Torus::frequency(std::size_t index) const noexcept {
  const Coord c = coord(index);
  std::array<double, 3> xi{0.0, 0.0, 0.0};
  const double base = 2.0 * M_PI / period_;
  for (int a = 0; a < dim_; ++a) xi[a] = base * signed_mode(c[a]);
  return xi;
}

Coord Torus::separation(std::size_t a, std::size_t b) const noexcept {
  const Coord ca = coord(a), cb = coord(b);
  Coord d{0, 0, 0};
  for (int k = 0; k < dim_; ++k) {
    int s = std::abs(ca[k] - cb[k]);
    d[k] = std::min(s, m_ - s);
  }
  return d;
}

double Torus::distance(std::size_t a, std::size_t b) const noexcept {
  const Coord d = separation(a, b);
  double s = 0.0;
  for (int k = 0; k < dim_; ++k) s += double(d[k]) * d[k];
  return std::sqrt(s) * spacing();
}

// --- Field -------------------------------------------------------------------

Field::Field(Torus torus, int fiber_dim, Domain domain)
    : torus_(torus), fiber_(fiber_dim), domain_(domain) {
  if (fiber_dim < 1) throw LatticeError("fiber dimension must be >= 1");
  values_.assign(torus_.num_points() * fiber_, cplx(0.0, 0.0));
}

Field::Field(Torus torus, int fiber_dim, std::vector<cplx> values, Domain domain)
    : torus_(torus), fiber_(fiber_dim), domain_(domain), values_(std::move(values)) {
  if (fiber_dim < 1) throw LatticeError("fiber dimension must be >= 1");
  if (values_.size() != torus_.num_points() * fiber_)
    throw LatticeError("field value count does not match grid x fiber");
  for (const cplx& v : values_)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
      throw LatticeError("field entries must be finite");
}

double Field::pointwise_norm(std::size_t point) const noexcept {
  double s = 0.0;
  for (int c = 0; c < fiber_; ++c) s += std::norm(values_[point * fiber_ + c]);
  return std::sqrt(s);
}

void Field::require_same_shape(const Field& o, const char* what) const {
  if (!same_shape(o))
    throw LatticeError(std::string("dimension mismatch in ") + what);
}

Field& Field::operator+=(const Field& o) {
  require_same_shape(o, "field addition");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
  return *this;
}

Field& Field::operator-=(const Field& o) {
  require_same_shape(o, "field subtraction");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
  return *this;
}

Field& Field::operator*=(cplx s) {
  for (cplx& v : values_) v *= s;
  return *this;
}

Field Field::constant(const Torus& torus, const std::vector<cplx>& w) {
  Field f(torus, static_cast<int>(w.size()));
  for (std::size_t p = 0; p < torus.num_points(); ++p)
    for (std::size_t c = 0; c < w.size(); ++c) f.at(p, static_cast<int>(c)) = w[c];
  return f;
}

cplx inner(const Field& u, const Field& v) {
  u.require_same_shape(v, "inner product");
  cplx s(0.0, 0.0);
  const auto& a = u.values();
  const auto& b = v.values();
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s * u.torus().cell_volume();
}

double coefficient_norm(const Field& u) {
  double s = 0.0;
  for (const cplx& v : u.values()) s += std::norm(v);
  return std::sqrt(s);
}

// --- transforms ----------------------------------------------------------------

namespace {

// FFTW planning is not thread-safe; execution of an existing plan on new
// arrays is. Plans are created once per shape under a lock and never freed.
class PlanCache {
 public:
  fftw_plan get(int dim, int m, int fiber, int sign) {
    std::lock_guard<std::mutex> lock(mu_);
    auto key = std::make_tuple(dim, m, fiber, sign);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    int dims[3] = {m, m, m};
    std::size_t total = 1;
    for (int a = 0; a < dim; ++a) total *= m;
    // out-of-place, like every execution in transform()
    std::vector<cplx> src(total * fiber), dst(total * fiber);
    auto* in = reinterpret_cast<fftw_complex*>(src.data());
    auto* out = reinterpret_cast<fftw_complex*>(dst.data());
    fftw_plan plan = fftw_plan_many_dft(dim, dims, fiber, in, nullptr, fiber, 1, out,
                                        nullptr, fiber, 1, sign,
                                        FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (plan == nullptr) throw LatticeError("FFT planning failed");
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mu_;
  std::map<std::tuple<int, int, int, int>, fftw_plan> plans_;
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

Field transform(const Field& f, int sign, Domain out_domain) {
  const Torus& t = f.torus();
  Field out(t, f.fiber_dim(), out_domain);
  fftw_plan plan = plan_cache().get(t.dim(), t.points_per_axis(), f.fiber_dim(), sign);
  // FFTW never writes to the input of an out-of-place complex transform
  auto* in = reinterpret_cast<fftw_complex*>(const_cast<cplx*>(f.values().data()));
  auto* dst = reinterpret_cast<fftw_complex*>(out.values().data());
  fftw_execute_dft(plan, in, dst);
  const double scale = 1.0 / std::sqrt(static_cast<double>(t.num_points()));
  for (cplx& v : out.values()) v *= scale;
  return out;
}

}  // namespace

Field forward_transform(const Field& f) {
  if (f.domain() != Domain::space) throw LatticeError("forward transform expects a spatial field");
  return transform(f, FFTW_FORWARD, Domain::frequency);
}

Field inverse_transform(const Field& f) {
  if (f.domain() != Domain::frequency)
    throw LatticeError("inverse transform expects a frequency field");
  return transform(f, FFTW_BACKWARD, Domain::space);
}

// --- norms -------------------------------------------------------------------------

double lp_quasinorm(const Field& f, double p) {
  if (!(p > 0.0)) throw LatticeError("exponent must be positive");
  const double w = f.torus().cell_volume();
  if (std::isinf(p)) {
    double m = 0.0;
    for (std::size_t x = 0; x < f.torus().num_points(); ++x)
      m = std::max(m, f.pointwise_norm(x));
    return m;
  }
  double s = 0.0;
  for (std::size_t x = 0; x < f.torus().num_points(); ++x)
    s += std::pow(f.pointwise_norm(x), p);
  return std::pow(s * w, 1.0 / p);
}

double lp_norm(const Field& f, double p) {
  if (!(p >= 1.0)) throw LatticeError("L^p norm requires p >= 1");
  return lp_quasinorm(f, p);
}

// --- sets ------------------------------------------------------------------------------

GridSet::GridSet(Torus torus, std::vector<bool> membership)
    : torus_(torus), mask_(std::move(membership)) {
  if (mask_.size() != torus_.num_points()) throw LatticeError("grid set mask has wrong size");
}

GridSet GridSet::empty(const Torus& torus) {
  return GridSet(torus, std::vector<bool>(torus.num_points(), false));
}
GridSet GridSet::full(const Torus& torus) {
  return GridSet(torus, std::vector<bool>(torus.num_points(), true));
}
GridSet GridSet::single(const Torus& torus, std::size_t point) {
  GridSet s = empty(torus);
  s.mask_.at(point) = true;
  return s;
}

std::size_t GridSet::count() const noexcept {
  return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), true));
}

GridSet GridSet::operator|(const GridSet& o) const {
  std::vector<bool> m(mask_.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = mask_[i] || o.mask_.at(i);
  return GridSet(torus_, std::move(m));
}
GridSet GridSet::operator&(const GridSet& o) const {
  std::vector<bool> m(mask_.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = mask_[i] && o.mask_.at(i);
  return GridSet(torus_, std::move(m));
}
GridSet GridSet::operator-(const GridSet& o) const {
  std::vector<bool> m(mask_.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = mask_[i] && !o.mask_.at(i);
  return GridSet(torus_, std::move(m));
}

namespace {
std::vector<std::size_t> members(const GridSet& s) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < s.mask().size(); ++i)
    if (s.mask()[i]) out.push_back(i);
  return out;
}
}  // namespace

double periodic_distance(const GridSet& e, const GridSet& f) {
  if (e.torus() != f.torus()) throw LatticeError("sets live on different tori");
  const auto a = members(e), b = members(f);
  if (a.empty() || b.empty()) throw LatticeError("empty-set distance undefined");
  const Torus& t = e.torus();
  long best = std::numeric_limits<long>::max();
  for (std::size_t x : a) {
    if (f.contains(x)) return 0.0;
    for (std::size_t y : b) {
      const Coord d = t.separation(x, y);
      long s = 0;
      for (int k = 0; k < t.dim(); ++k) s += long(d[k]) * d[k];
      best = std::min(best, s);
    }
  }
  return std::sqrt(double(best)) * t.spacing();
}

GridSet far_set(const GridSet& f, double d) {
  const Torus& t = f.torus();
  const auto b = members(f);
  if (b.empty()) throw LatticeError("empty-set distance undefined");
  std::vector<bool> m(t.num_points(), false);
  for (std::size_t x = 0; x < t.num_points(); ++x) {
    if (f.contains(x)) continue;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t y : b) best = std::min(best, t.distance(x, y));
    m[x] = best >= d;
  }
  return GridSet(t, std::move(m));
}

Field restrict_to(const Field& u, const GridSet& s) {
  if (u.torus() != s.torus()) throw LatticeError("set and field live on different tori");
  Field out = u;
  for (std::size_t x = 0; x < u.torus().num_points(); ++x)
    if (!s.contains(x))
      for (int c = 0; c < u.fiber_dim(); ++c) out.at(x, c) = 0.0;
  return out;
}

std::vector<DyadicCube> dyadic_cubes(const Torus& torus, int level) {
  if (level < 0 || (1 << level) > torus.points_per_axis())
    throw LatticeError("dyadic level exceeds torus size");
  const int side = 1 << level;
  const int per_axis = torus.points_per_axis() / side;
  std::size_t count = 1;
  for (int a = 0; a < torus.dim(); ++a) count *= per_axis;
  const double len = side * torus.spacing();
  std::vector<DyadicCube> cubes;
  cubes.reserve(count);
  for (std::size_t q = 0; q < count; ++q) {
    Coord anchor{0, 0, 0};
    std::size_t r = q;
    for (int a = torus.dim() - 1; a >= 0; --a) {
      anchor[a] = static_cast<int>(r % per_axis) * side;
      r /= per_axis;
    }
    cubes.push_back({level, anchor, len, std::pow(len, torus.dim())});
  }
  return cubes;
}

std::size_t dyadic_cube_of(const Torus& torus, int level, std::size_t point) {
  if (level < 0 || (1 << level) > torus.points_per_axis())
    throw LatticeError("dyadic level exceeds torus size");
  const int side = 1 << level;
  const int per_axis = torus.points_per_axis() / side;
  const Coord c = torus.coord(point);
  std::size_t q = 0;
  for (int a = 0; a < torus.dim(); ++a) q = q * per_axis + static_cast<std::size_t>(c[a] / side);
  return q;
}

GridSet ball_set(const Torus& torus, const Ball& b) {
  std::vector<bool> m(torus.num_points(), false);
  for (std::size_t x = 0; x < torus.num_points(); ++x)
    m[x] = torus.distance(x, b.center) < b.radius;
  return GridSet(torus, std::move(m));
}

GridSet shell(const Torus& torus, const Ball& b, int j) {
  if (j < 1) throw LatticeError("shell index must be >= 1");
  const Ball outer{b.center, std::ldexp(b.radius, j + 1)};
  if (j == 1) return ball_set(torus, outer);
  const Ball inner_ball{b.center, std::ldexp(b.radius, j)};
  return ball_set(torus, outer) - ball_set(torus, inner_ball);
}

// --- persistence ------------------------------------------------------------------------

void write_field_csv(std::ostream& os, const Field& f) {
  const Torus& t = f.torus();
  os << "n,m,period,N\n";
  os << t.dim() << ',' << t.points_per_axis() << ',';
  os.precision(17);
  os << t.period() << ',' << f.fiber_dim() << '\n';
  for (std::size_t x = 0; x < t.num_points(); ++x) {
    for (int c = 0; c < f.fiber_dim(); ++c) {
      if (c) os << ',';
      os << f.at(x, c).real() << ',' << f.at(x, c).imag();
    }
    os << '\n';
  }
}

Field read_field_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("n,m,period,N", 0) != 0)
    throw LatticeError("field CSV: missing header");
  if (!std::getline(is, line)) throw LatticeError("field CSV: missing dimensions");
  int n = 0, m = 0, fiber = 0;
  double period = 0.0;
  {
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    if (!(ls >> n >> m >> period >> fiber)) throw LatticeError("field CSV: bad dimensions");
  }
  Torus t(n, m, period);
  std::vector<cplx> vals;
  vals.reserve(t.num_points() * fiber);
  for (std::size_t x = 0; x < t.num_points(); ++x) {
    if (!std::getline(is, line)) throw LatticeError("field CSV: truncated");
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    for (int c = 0; c < fiber; ++c) {
      double re = 0.0, im = 0.0;
      if (!(ls >> re >> im)) throw LatticeError("field CSV: short row");
      vals.emplace_back(re, im);
    }
  }
  return Field(t, fiber, std::move(vals));
}

void write_field_binary(std::ostream& os, const Field& f) {
  const Torus& t = f.torus();
  const std::int32_t n = t.dim(), m = t.points_per_axis(), fiber = f.fiber_dim();
  const double period = t.period();
  os.write(reinterpret_cast<const char*>(&n), sizeof n);
  os.write(reinterpret_cast<const char*>(&m), sizeof m);
  os.write(reinterpret_cast<const char*>(&period), sizeof period);
  os.write(reinterpret_cast<const char*>(&fiber), sizeof fiber);
  os.write(reinterpret_cast<const char*>(f.values().data()),
           static_cast<std::streamsize>(f.values().size() * sizeof(cplx)));
}

Field read_field_binary(std::istream& is) {
  std::int32_t n = 0, m = 0, fiber = 0;
  double period = 0.0;
  is.read(reinterpret_cast<char*>(&n), sizeof n);
  is.read(reinterpret_cast<char*>(&m), sizeof m);
  is.read(reinterpret_cast<char*>(&period), sizeof period);
  is.read(reinterpret_cast<char*>(&fiber), sizeof fiber);
  if (!is) throw LatticeError("field binary: truncated header");
  Torus t(n, m, period);
  std::vector<cplx> vals(t.num_points() * fiber);
  is.read(reinterpret_cast<char*>(vals.data()),
          static_cast<std::streamsize>(vals.size() * sizeof(cplx)));
  if (!is) throw LatticeError("field binary: truncated values");
  return Field(t, fiber, std::move(vals));
}

}  // namespace hodgelab
