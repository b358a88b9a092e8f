#ifndef STAGECCD_STRUCTURAL_MODAL_HPP
#define STAGECCD_STRUCTURAL_MODAL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <sstream>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "stageccd/errors.hpp"
#include "stageccd/structural/assembly.hpp"
#include "stageccd/structural/mesh.hpp"

namespace stageccd {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline double hz_to_rad(double hz) { return kTwoPi * hz; }
inline double rad_to_hz(double rad) { return rad / kTwoPi; }

enum class EigenMethod {
  /// Dense below `dense_limit` degrees of freedom, subspace iteration above.
  kAuto,
  /// Cholesky reduction of M to a standard symmetric problem, full spectrum.
  kDense,
  /// Shift-invert subspace iteration with Rayleigh-Ritz on sparse factors.
  kSubspace,
};

struct ModalSolveOptions {
  EigenMethod method{EigenMethod::kAuto};
  Eigen::Index dense_limit{300};
  /// Modes below this fraction of the 7th frequency are rigid-body modes.
  double rigid_threshold_ratio{1e-3};
  /// Spectral shift (rad/s)^2 of the subspace iteration operator K + shift M.
  double shift{std::pow(kTwoPi * 5.0, 2)};
  int max_iterations{400};
  /// Normwise backward error |K x - lambda M x| / ((|K| + |lambda| |M|) |x|).
  double tolerance{1e-12};
};

/// Free-vibration description of the stage.
///
/// Columns of `mode_shapes` are mass-normalized (phi^T M phi = I), ordered by
/// ascending frequency. The leading `n_rigid` columns span the rigid-body
/// motions.
struct ModalModel {
  Eigen::VectorXd frequencies;  // rad/s
  Eigen::MatrixXd mode_shapes;
  Eigen::VectorXd damping;
  int n_rigid{0};
  std::shared_ptr<const FEMesh> mesh;
  /// Subspace iterations used; zero for the dense route.
  int iterations{0};

  int mode_count() const { return static_cast<int>(frequencies.size()); }
  int flexible_count() const { return mode_count() - n_rigid; }
  bool is_rigid(int i) const { return i < n_rigid; }
  /// Index of the k-th flexible mode (k = 0 is the first flexible mode).
  int flexible_index(int k) const { return n_rigid + k; }
  double frequency_hz(int i) const { return rad_to_hz(frequencies[i]); }

  /// The same model with every mode shape negated in the selected columns.
  ModalModel with_flipped_signs(const std::vector<int>& modes) const {
    ModalModel out = *this;
    for (int i : modes) out.mode_shapes.col(i) *= -1.0;
    return out;
  }
};

namespace detail {

/// Deterministic uniform(-1, 1) stream (splitmix64).
class StartVectorStream {
 public:
  explicit StartVectorStream(std::uint64_t seed) : state_(seed) {}
  double next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return 2.0 * (static_cast<double>(z >> 11) * 0x1.0p-53) - 1.0;
  }

 private:
  std::uint64_t state_;
};

inline void normalize_signs(Eigen::MatrixXd& shapes) {
  for (Eigen::Index j = 0; j < shapes.cols(); ++j) {
    Eigen::Index imax = 0;
    shapes.col(j).cwiseAbs().maxCoeff(&imax);
    if (shapes(imax, j) < 0) shapes.col(j) *= -1.0;
  }
}

/// Solves the small generalized problem (kr, mr) and returns ascending
/// eigenvalues with mr-orthonormal eigenvectors.
inline void small_generalized_eig(const Eigen::MatrixXd& kr, const Eigen::MatrixXd& mr,
                                  Eigen::VectorXd& values, Eigen::MatrixXd& vectors) {
  Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (mr + mr.transpose()));
  if (llt.info() != Eigen::Success) {
    throw FactorizationError("projected mass matrix is not positive definite");
  }
  const Eigen::MatrixXd l = llt.matrixL();
  const Eigen::MatrixXd a = l.triangularView<Eigen::Lower>().solve(kr);
  Eigen::MatrixXd c = l.triangularView<Eigen::Lower>().solve(a.transpose()).transpose();
  c = 0.5 * (c + c.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
  if (es.info() != Eigen::Success) throw ConvergenceError("projected eigenproblem did not converge");
  values = es.eigenvalues();
  vectors = l.transpose().triangularView<Eigen::Upper>().solve(es.eigenvectors());
}

inline double one_norm(const SparseMatrix& a) {
  double best = 0;
  for (Eigen::Index j = 0; j < a.outerSize(); ++j) {
    double sum = 0;
    for (SparseMatrix::InnerIterator it(a, j); it; ++it) sum += std::abs(it.value());
    best = std::max(best, sum);
  }
  return best;
}

inline int count_rigid(const Eigen::VectorXd& omega, double ratio) {
  if (omega.size() < 7) return 0;
  const double thr = ratio * omega[6];
  int n = 0;
  while (n < omega.size() && omega[n] < thr) ++n;
  return n;
}

inline void solve_dense(const SparseMatrix& mass, const SparseMatrix& stiffness, int n_modes,
                        Eigen::VectorXd& lambda, Eigen::MatrixXd& shapes) {
  const Eigen::MatrixXd m = Eigen::MatrixXd(mass);
  const Eigen::MatrixXd k = Eigen::MatrixXd(stiffness);
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    throw FactorizationError("mass matrix is not positive definite (Cholesky failed)");
  }
  const Eigen::MatrixXd l = llt.matrixL();
  const Eigen::MatrixXd a = l.triangularView<Eigen::Lower>().solve(k);
  Eigen::MatrixXd c = l.triangularView<Eigen::Lower>().solve(a.transpose()).transpose();
  c = 0.5 * (c + c.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
  if (es.info() != Eigen::Success) {
    std::ostringstream os;
    os << "dense symmetric eigensolver did not converge (n = " << c.rows() << ")";
    throw ConvergenceError(os.str());
  }
  lambda = es.eigenvalues().head(n_modes);
  shapes = l.transpose().triangularView<Eigen::Upper>().solve(es.eigenvectors().leftCols(n_modes));
}

inline int solve_subspace(const SparseMatrix& mass, const SparseMatrix& stiffness, int n_modes,
                          const ModalSolveOptions& opt, Eigen::VectorXd& lambda,
                          Eigen::MatrixXd& shapes) {
  const Eigen::Index n = mass.rows();
  {
    Eigen::SimplicialLDLT<SparseMatrix> mcheck(mass);
    if (mcheck.info() != Eigen::Success || mcheck.vectorD().minCoeff() <= 0) {
      throw FactorizationError("mass matrix is not positive definite (LDLT pivot <= 0)");
    }
  }
  const double knorm = one_norm(stiffness);
  const double mnorm = one_norm(mass);
  const SparseMatrix shifted = stiffness + opt.shift * mass;
  Eigen::SimplicialLDLT<SparseMatrix> solver(shifted);
  if (solver.info() != Eigen::Success || solver.vectorD().minCoeff() <= 0) {
    throw FactorizationError("shifted stiffness K + shift*M is not positive definite");
  }

  const Eigen::Index block = std::min<Eigen::Index>(n, std::max<Eigen::Index>(2 * n_modes, n_modes + 8));
  Eigen::MatrixXd x(n, block);
  StartVectorStream rng(0x5EEDULL);
  for (Eigen::Index j = 0; j < block; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) x(i, j) = rng.next();
  }

  Eigen::VectorXd values;
  Eigen::MatrixXd q;
  double worst = 0;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    const Eigen::MatrixXd y = solver.solve(mass * x);
    const Eigen::MatrixXd ky = stiffness * y;
    const Eigen::MatrixXd my = mass * y;
    Eigen::MatrixXd kr = y.transpose() * ky;
    Eigen::MatrixXd mr = y.transpose() * my;
    kr = 0.5 * (kr + kr.transpose());
    small_generalized_eig(kr, mr, values, q);
    x = y * q;

    const Eigen::MatrixXd kx = ky * q.leftCols(n_modes);
    const Eigen::MatrixXd mx = my * q.leftCols(n_modes);
    worst = 0;
    for (int j = 0; j < n_modes; ++j) {
      const double lam = values[j];
      const double res = (kx.col(j) - lam * mx.col(j)).norm();
      const double scale = (knorm + std::abs(lam) * mnorm) * x.col(j).norm();
      worst = std::max(worst, res / scale);
    }
    if (worst <= opt.tolerance) {
      lambda = values.head(n_modes);
      shapes = x.leftCols(n_modes);
      return it;
    }
  }
  std::ostringstream os;
  os << "subspace iteration did not converge in " << opt.max_iterations
     << " iterations (block " << block << ", worst relative residual " << worst
     << ", tolerance " << opt.tolerance << ")";
  throw ConvergenceError(os.str());
}

}  // namespace detail

/// Lowest `n_modes` free-vibration modes of K phi = omega^2 M phi.
inline ModalModel solve_modes(const SparseMatrix& mass, const SparseMatrix& stiffness, int n_modes,
                              double damping_ratio, const ModalSolveOptions& options = {}) {
  if (n_modes < 8) throw InvalidArgument("solve_modes: n_modes must be at least 8");
  if (!(damping_ratio > 0 && damping_ratio < 1)) {
    throw InvalidArgument("solve_modes: damping ratio must lie in (0, 1)");
  }
  if (mass.rows() != mass.cols() || stiffness.rows() != mass.rows() || stiffness.cols() != mass.cols()) {
    throw InvalidArgument("solve_modes: matrix dimensions disagree");
  }
  if (n_modes > mass.rows()) throw InvalidArgument("solve_modes: more modes than degrees of freedom");

  EigenMethod method = options.method;
  if (method == EigenMethod::kAuto) {
    method = mass.rows() <= options.dense_limit ? EigenMethod::kDense : EigenMethod::kSubspace;
  }
  Eigen::VectorXd lambda;
  Eigen::MatrixXd shapes;
  ModalModel model;
  if (method == EigenMethod::kDense) {
    detail::solve_dense(mass, stiffness, n_modes, lambda, shapes);
  } else {
    model.iterations = detail::solve_subspace(mass, stiffness, n_modes, options, lambda, shapes);
  }
  detail::normalize_signs(shapes);
  model.frequencies = lambda.unaryExpr([](double l) { return std::sqrt(std::max(l, 0.0)); });
  model.mode_shapes = std::move(shapes);
  model.damping = Eigen::VectorXd::Constant(n_modes, damping_ratio);
  model.n_rigid = detail::count_rigid(model.frequencies, options.rigid_threshold_ratio);
  return model;
}

/// Mesh, assembly and eigen solution in one call.
inline ModalModel modal_analysis(std::shared_ptr<const FEMesh> mesh, const MaterialSpec& material,
                                 const std::vector<LumpedAttachment>& attachments, int n_modes,
                                 double damping_ratio, const AssemblyOptions& assembly = {},
                                 const ModalSolveOptions& solve = {}) {
  const StructuralMatrices mk = assemble(*mesh, material, attachments, assembly);
  ModalModel model = solve_modes(mk.mass, mk.stiffness, n_modes, damping_ratio, solve);
  model.mesh = std::move(mesh);
  return model;
}

}  // namespace stageccd

#endif  // STAGECCD_STRUCTURAL_MODAL_HPP
