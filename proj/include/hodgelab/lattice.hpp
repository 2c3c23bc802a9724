#pragma once

// Periodic grids, C^N-valued fields on them, unitary spectral transforms,
// discrete L^p norms and the set geometry (distances, dyadic cubes, balls,
// shells) used by the off-diagonal and tent-space machinery.

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace hodgelab {

using cplx = std::complex<double>;

/// Base class for every error raised by the library. `module()` names the
/// subsystem so the CLI can map failures onto exit codes.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& what)
      : std::runtime_error(module + ": " + what), module_(std::move(module)) {}
  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

class LatticeError : public Error {
 public:
  explicit LatticeError(const std::string& what) : Error("lattice", what) {}
};

/// Grid coordinates of a point; only the first `dim` entries are meaningful.
using Coord = std::array<int, 3>;

/// The n-torus [0, period)^n sampled with m points per axis.
class Torus {
 public:
  Torus(int dim, int points_per_axis, double period = 1.0);

  int dim() const noexcept { return dim_; }
  int points_per_axis() const noexcept { return m_; }
  double period() const noexcept { return period_; }
  double spacing() const noexcept { return period_ / m_; }
  std::size_t num_points() const noexcept { return num_points_; }
  /// Volume of the torus, period^n.
  double volume() const noexcept;
  /// Quadrature weight h^n of one grid cell.
  double cell_volume() const noexcept;

  Coord coord(std::size_t index) const noexcept;
  std::size_t index(const Coord& c) const noexcept;  // wraps periodically

  /// Signed integer frequency of FFT bin k along one axis, in [-m/2, m/2).
  int signed_mode(int k) const noexcept { return k < m_ / 2 ? k : k - m_; }
  /// Angular frequency vector xi = 2 pi k / period of a frequency-bin index.
  std::array<double, 3> frequency(std::size_t index) const noexcept;
  /// Minimal-image separation between two points, per axis, in grid units.
  Coord separation(std::size_t a, std::size_t b) const noexcept;
  /// Torus (minimal-image) Euclidean distance between two grid points.
  double distance(std::size_t a, std::size_t b) const noexcept;

  bool operator==(const Torus& o) const noexcept {
    return dim_ == o.dim_ && m_ == o.m_ && period_ == o.period_;
  }
  bool operator!=(const Torus& o) const noexcept { return !(*this == o); }

 private:
  int dim_;
  int m_;
  double period_;
  std::size_t num_points_;
};

enum class Domain { space, frequency };

/// A C^N-valued function sampled on a torus. Values are stored point-major:
/// the fiber components of one grid point are contiguous.
class Field {
 public:
  Field(Torus torus, int fiber_dim, Domain domain = Domain::space);
  Field(Torus torus, int fiber_dim, std::vector<cplx> values,
        Domain domain = Domain::space);

  const Torus& torus() const noexcept { return torus_; }
  int fiber_dim() const noexcept { return fiber_; }
  Domain domain() const noexcept { return domain_; }
  std::size_t size() const noexcept { return values_.size(); }

  cplx& at(std::size_t point, int comp) { return values_[point * fiber_ + comp]; }
  const cplx& at(std::size_t point, int comp) const {
    return values_[point * fiber_ + comp];
  }
  std::vector<cplx>& values() noexcept { return values_; }
  const std::vector<cplx>& values() const noexcept { return values_; }

  /// Euclidean norm of the fiber vector at one point.
  double pointwise_norm(std::size_t point) const noexcept;

  Field& operator+=(const Field& o);
  Field& operator-=(const Field& o);
  Field& operator*=(cplx s);
  friend Field operator+(Field a, const Field& b) { return a += b; }
  friend Field operator-(Field a, const Field& b) { return a -= b; }
  friend Field operator*(cplx s, Field a) { return a *= s; }
  friend Field operator*(Field a, cplx s) { return a *= s; }

  /// Same shape, all zeros.
  Field zeros_like() const { return Field(torus_, fiber_, domain_); }
  bool same_shape(const Field& o) const noexcept {
    return torus_ == o.torus_ && fiber_ == o.fiber_ && domain_ == o.domain_;
  }
  void require_same_shape(const Field& o, const char* what) const;

  /// Constant field equal to w at every point.
  static Field constant(const Torus& torus, const std::vector<cplx>& w);

 private:
  Torus torus_;
  int fiber_;
  Domain domain_;
  std::vector<cplx> values_;
};

/// Grid inner product sum_x h^n <u(x), v(x)> (conjugate-linear in u).
cplx inner(const Field& u, const Field& v);
/// Plain Euclidean coefficient norm, sqrt(sum |v_i|^2), no quadrature weight.
double coefficient_norm(const Field& u);

// --- spectral transforms ---------------------------------------------------

/// Unitary DFT (normalised by m^{-n/2}); component-wise over the fiber.
Field forward_transform(const Field& f);
Field inverse_transform(const Field& f);

// --- norms -------------------------------------------------------------------

/// Riemann-sum L^p norm with weight h^n; p = infinity gives the sup norm.
double lp_norm(const Field& f, double p);
/// Same sum for 0 < p < 1 (a quasi-norm). Used by the Sobolev-exponent probe.
double lp_quasinorm(const Field& f, double p);

// --- set geometry --------------------------------------------------------------

/// Subset of the grid points of a torus.
class GridSet {
 public:
  GridSet(Torus torus, std::vector<bool> membership);
  static GridSet empty(const Torus& torus);
  static GridSet full(const Torus& torus);
  static GridSet single(const Torus& torus, std::size_t point);

  const Torus& torus() const noexcept { return torus_; }
  bool contains(std::size_t point) const { return mask_[point]; }
  std::size_t count() const noexcept;
  bool is_empty() const noexcept { return count() == 0; }
  const std::vector<bool>& mask() const noexcept { return mask_; }

  GridSet operator|(const GridSet& o) const;
  GridSet operator&(const GridSet& o) const;
  GridSet operator-(const GridSet& o) const;  // set difference
  bool operator==(const GridSet& o) const { return torus_ == o.torus_ && mask_ == o.mask_; }

 private:
  Torus torus_;
  std::vector<bool> mask_;
};

/// inf{|x - y| : x in E, y in F} in the torus metric.
double periodic_distance(const GridSet& e, const GridSet& f);

/// Points at torus distance >= d from every point of `f` (and F itself excluded).
GridSet far_set(const GridSet& f, double d);

/// Multiply a field by the indicator of a set.
Field restrict_to(const Field& u, const GridSet& s);

struct DyadicCube {
  int level;      // sidelength 2^level grid spacings
  Coord anchor;   // lower corner, grid coordinates
  double sidelength;
  double volume;
};

/// All dyadic cubes of sidelength 2^level * h; they tile the torus.
std::vector<DyadicCube> dyadic_cubes(const Torus& torus, int level);
/// Index into `dyadic_cubes(torus, level)` of the cube containing `point`.
std::size_t dyadic_cube_of(const Torus& torus, int level, std::size_t point);

struct Ball {
  std::size_t center;  // grid point
  double radius;
};

/// Open ball {x : |x - center| < radius} (torus metric).
GridSet ball_set(const Torus& torus, const Ball& b);
/// Dyadic shell: S_1(B) = 4B, S_j(B) = 2^{j+1}B \ 2^j B for j >= 2.
GridSet shell(const Torus& torus, const Ball& b, int j);

// --- persistence -----------------------------------------------------------------

/// CSV record: header line "n,m,period,N", then one row per point holding the
/// fiber components as re,im pairs.
void write_field_csv(std::ostream& os, const Field& f);
Field read_field_csv(std::istream& is);
/// Binary record: int32 n, int32 m, float64 period, int32 N, then row-major
/// complex values as interleaved float64 (re, im), little-endian host order.
void write_field_binary(std::ostream& os, const Field& f);
Field read_field_binary(std::istream& is);

}  // namespace hodgelab
