#pragma once

// Constant-coefficient Hodge-Dirac operators Pi = Gamma + Gamma^* built from
// symbol matrices, their L^infinity perturbations Pi_B = Gamma + B1 Gamma^* B2,
// the structural audits (nilpotency, coercivity, accretivity) and the
// built-in families: the 1D model, differential forms, divergence-form
// elliptic operators and DA systems.

#include <Eigen/Dense>

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hodgelab/lattice.hpp"
#include "hodgelab/random.hpp"

namespace hodgelab {

using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

class DiracError : public Error {
 public:
  explicit DiracError(const std::string& what) : Error("dirac", what) {}
};

/// Raised by the structural audits; `kind()` is "nilpotency", "coercivity",
/// "accretivity" or "ellipticity".
class AuditError : public Error {
 public:
  AuditError(std::string kind, const std::string& what)
      : Error("dirac", kind + " audit failed: " + what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

/// Symbol of Gamma = -i sum_j G_j d_j: Gamma-hat(xi) = sum_j G_j xi_j.
class DiracSymbol {
 public:
  DiracSymbol(int dim, std::vector<Matrix> generators);

  int dim() const noexcept { return dim_; }
  int fiber_dim() const noexcept { return fiber_; }
  const std::vector<Matrix>& generators() const noexcept { return gens_; }

  Matrix gamma_hat(const std::array<double, 3>& xi) const;
  Matrix gamma_star_hat(const std::array<double, 3>& xi) const {
    return gamma_hat(xi).adjoint();
  }
  Matrix pi_hat(const std::array<double, 3>& xi) const;

  /// Symbol with generators G_j^H, i.e. Gamma^* in place of Gamma.
  DiracSymbol adjoint() const;
  /// max_{j,k} ||G_j G_k + G_k G_j||.
  double nilpotency_defect() const;
  bool is_zero() const;

 private:
  int dim_;
  int fiber_;
  std::vector<Matrix> gens_;
};

/// Throws AuditError("nilpotency") when an anticommutator exceeds `tol`.
void check_nilpotency(const DiracSymbol& sym, double tol = 1e-12);

struct CoercivityReport {
  double kappa;           // +infinity when every range is trivial
  bool vacuous;
  std::array<double, 3> worst_xi;
};

/// Smallest singular value of Pi-hat(xi) on its numerical range, divided by
/// |xi|, minimised over the nonzero grid frequencies of `torus`.
CoercivityReport coercivity_audit(const DiracSymbol& sym, const Torus& torus,
                                  double tol = 1e-8);

/// N x N matrix per grid point, row-major per point.
class MatrixField {
 public:
  MatrixField(Torus torus, int n);
  static MatrixField identity(const Torus& torus, int n);
  static MatrixField scalar(const Field& a, int n);  // a(x) I

  const Torus& torus() const noexcept { return torus_; }
  int rows() const noexcept { return n_; }
  Eigen::Map<Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> at(
      std::size_t x) {
    return {data_.data() + x * n_ * n_, n_, n_};
  }
  Eigen::Map<const Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> at(
      std::size_t x) const {
    return {data_.data() + x * n_ * n_, n_, n_};
  }
  /// sup_x of the operator norm.
  double sup_norm() const;
  /// (M u)(x) = M(x) u(x).
  Field apply(const Field& u) const;
  /// Pointwise conjugate transpose.
  MatrixField adjoint() const;
  /// Embed an m x m field as the block starting at (offset, offset) of an n x n field.
  static MatrixField embed(const MatrixField& block, int n, int offset);

 private:
  Torus torus_;
  int n_;
  std::vector<cplx> data_;
};

/// B(x) = I + rho(x) with sup_x ||rho(x)|| = amplitude. "smooth" draws rho
/// from band-limited complex Gaussians, "rough" independently per point.
enum class Roughness { smooth, rough };
MatrixField random_accretive(const Torus& torus, int n, double amplitude, Roughness kind,
                             Rng& rng, int band = -1);
/// Diagonal version (one random scalar per diagonal entry).
MatrixField random_accretive_diagonal(const Torus& torus, int n, double amplitude,
                                      Roughness kind, Rng& rng, int band = -1);

/// Pi_B = Gamma + B1 Gamma^* B2 on a torus. Missing B's mean the identity.
class PerturbedDirac {
 public:
  PerturbedDirac(DiracSymbol symbol, Torus torus, std::optional<MatrixField> b1 = {},
                 std::optional<MatrixField> b2 = {}, std::string name = "custom");

  const DiracSymbol& symbol() const noexcept { return symbol_; }
  const Torus& torus() const noexcept { return torus_; }
  int fiber_dim() const noexcept { return symbol_.fiber_dim(); }
  std::size_t total_dim() const noexcept { return torus_.num_points() * fiber_dim(); }
  const std::optional<MatrixField>& b1() const noexcept { return b1_; }
  const std::optional<MatrixField>& b2() const noexcept { return b2_; }
  bool is_unperturbed() const noexcept { return !b1_ && !b2_; }
  const std::string& name() const noexcept { return name_; }

  /// Symbol matrix at a frequency-bin index (cached per torus).
  const Matrix& gamma_hat_at(std::size_t freq_index) const { return gamma_table_[freq_index]; }

  Field apply_gamma(const Field& u) const;
  Field apply_gamma_star(const Field& u) const;
  Field apply_pi(const Field& u) const;             // unperturbed Gamma + Gamma^*
  Field apply_gamma_star_b(const Field& u) const;   // B1 Gamma^* B2 u
  Field apply_pi_b(const Field& u) const;
  Field multiply_b1(const Field& u) const;
  Field multiply_b2(const Field& u) const;

  /// The same constructor with (Gamma, Gamma^*, B1, B2) -> (Gamma^*, Gamma, B2, B1).
  PerturbedDirac underline() const;
  /// Pi = Gamma + Gamma^* on the same torus.
  PerturbedDirac unperturbed() const;
  /// Columns are apply_pi_b of the unit basis fields.
  Matrix dense_matrix() const;

  /// Frequency-local multiplier: u-hat(xi) -> S(xi) u-hat(xi) where S is
  /// gamma_hat (adjoint = false) or its adjoint.
  Field apply_symbol(const Field& u, bool adjoint_symbol, bool add_adjoint = false) const;

 private:
  DiracSymbol symbol_;
  Torus torus_;
  std::optional<MatrixField> b1_, b2_;
  std::string name_;
  std::vector<Matrix> gamma_table_;
};

struct AccretivityReport {
  double kappa1, kappa2;
  double omega1, omega2;
  double omega;
};

/// kappa's are infima and omega's suprema of Re(Bv,v)/||v||^2 and |arg(Bv,v)|
/// over v = Gamma^* u (for B1) and v = Gamma u (for B2), u random band-limited.
AccretivityReport accretivity_audit(const PerturbedDirac& op, int trials, std::uint64_t seed);

struct StructuralReport {
  double gamma_star_defect;  // max ||Gamma^*(B2 B1 Gamma^* u)|| / ||u||
  double gamma_defect;       // max ||Gamma(B1 B2 Gamma u)|| / ||u||
};
StructuralReport structural_audit(const PerturbedDirac& op, int trials, std::uint64_t seed);

// --- built-in families --------------------------------------------------------------

/// n = 1, N = 2, G_1 = [[0,0],[1,0]].
DiracSymbol make_dirac1d_symbol();
/// Exterior derivative on C^{2^n}: Gamma = d with G_j = i (dx_j wedge).
DiracSymbol make_forms(int n);
/// Gamma = [[0,0],[grad,0]] on C^{1+n}: G_j = i E_{j,0}.
DiracSymbol make_gradient_symbol(int n);

/// Pi_B = [[0, -a div A], [grad, 0]] with B1 = diag(a, 0), B2 = diag(0, A).
/// Audits Re a >= kappa and Re A >= kappa I pointwise.
PerturbedDirac make_elliptic(const Field& a, const MatrixField& A, double min_ellipticity = 1e-8);
/// Pi_B = [[0, A D A], [D, 0]] on C^{2N}; D given by Hermitian generators.
PerturbedDirac make_da(const DiracSymbol& d, const MatrixField& A);

/// Real part lower bound min_x lambda_min((M + M^H)/2).
double pointwise_accretivity(const MatrixField& m);

}  // namespace hodgelab
