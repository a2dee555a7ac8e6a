#include "swarmflow/lti.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

namespace swarmflow {

namespace {

bool all_finite(const Eigen::Ref<const Matrix>& m) { return m.allFinite(); }

std::string dims(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

// Padé numerator/denominator coefficients, Higham (2005) Table 2.3 / eq. (10.33).
constexpr std::array<double, 4> kPade3 = {120., 60., 12., 1.};
constexpr std::array<double, 6> kPade5 = {30240., 15120., 3360., 420., 30., 1.};
constexpr std::array<double, 8> kPade7 = {17297280., 8648640., 1995840., 277200.,
                                          25200.,    1512.,    56.,      1.};
constexpr std::array<double, 10> kPade9 = {17643225600., 8821612800., 2075673600., 302702400.,
                                           30270240.,    2162160.,    110880.,     3960.,
                                           90.,          1.};
constexpr std::array<double, 14> kPade13 = {
    64764752532480000., 32382376266240000., 7771770303897600., 1187353796428800.,
    129060195264000.,   10559470521600.,    670442572800.,     33522128640.,
    1323241920.,        40840800.,          960960.,           16380.,
    182.,               1.};

// Largest 1-norm for which the degree-m approximant is accurate to unit roundoff.
constexpr double kTheta3 = 1.495585217958292e-2;
constexpr double kTheta5 = 2.539398330063230e-1;
constexpr double kTheta7 = 9.504178996162932e-1;
constexpr double kTheta9 = 2.097847961257068e0;
constexpr double kTheta13 = 5.371920351148152e0;

template <std::size_t N>
void pade_low(const Matrix& a, const std::array<double, N>& b, Matrix& u, Matrix& v) {
  const auto n = a.rows();
  const Matrix ident = Matrix::Identity(n, n);
  const Matrix a2 = a * a;
  Matrix power = ident;
  Matrix uu = b[1] * ident;
  v = b[0] * ident;
  for (std::size_t k = 2; k + 1 < N + 1; k += 2) {
    power = power * a2;
    v += b[k] * power;
    if (k + 1 < N) uu += b[k + 1] * power;
  }
  u = a * uu;
}

void pade13(const Matrix& a, Matrix& u, Matrix& v) {
  const auto& b = kPade13;
  const auto n = a.rows();
  const Matrix ident = Matrix::Identity(n, n);
  const Matrix a2 = a * a;
  const Matrix a4 = a2 * a2;
  const Matrix a6 = a4 * a2;
  const Matrix inner_u = a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2);
  u = a * (inner_u + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident);
  const Matrix inner_v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2);
  v = inner_v + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident;
}

// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration on P_n.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
}

}  // namespace

LtiSystem::LtiSystem(Matrix a, Matrix b) : a_(std::move(a)), b_(std::move(b)) {
  if (a_.rows() < 1 || a_.rows() != a_.cols()) {
    throw ShapeError("A must be square with d >= 1, got " + dims(a_));
  }
  if (b_.rows() != a_.rows() || b_.cols() < 1) {
    throw ShapeError("B must be " + std::to_string(a_.rows()) + "xm with m >= 1, got " +
                     dims(b_));
  }
  if (!all_finite(a_) || !all_finite(b_)) throw NumericError("A and B must be finite");
  bbt_ = b_ * b_.transpose();
}

LtiSystem LtiSystem::identity_channel(int d) {
  if (d < 1) throw ShapeError("identity-channel dimension must be >= 1");
  return {Matrix::Zero(d, d), Matrix::Identity(d, d)};
}

LtiSystem LtiSystem::double_integrator() {
  Matrix a(2, 2);
  a << 0, 1, 0, 0;
  Matrix b(2, 1);
  b << 0, 1;
  return {a, b};
}

LtiSystem LtiSystem::rotation2d(double omega) {
  Matrix a(2, 2);
  a << 0, -omega, omega, 0;
  return {a, Matrix::Identity(2, 2)};
}

LtiSystem LtiSystem::rotation3d(double omega_xy, double omega_yz) {
  Matrix a = Matrix::Zero(3, 3);
  a(0, 1) = -omega_xy;
  a(1, 0) = omega_xy;
  a(1, 2) = -omega_yz;
  a(2, 1) = omega_yz;
  return {a, Matrix::Identity(3, 3)};
}

TimeWindow::TimeWindow(double t, double r, double min_gap) : t_(t), r_(r) {
  if (!std::isfinite(t) || !std::isfinite(r) || t < 0.0 || r > 1.0 || !(t < r)) {
    std::ostringstream os;
    os << "window requires 0 <= t < r <= 1, got [" << t << ", " << r << "]";
    throw DomainError(os.str());
  }
  if (r - t < min_gap) {
    std::ostringstream os;
    os << "window length " << (r - t) << " below minimum gap " << min_gap;
    throw DomainError(os.str());
  }
}

bool check_controllability(const LtiSystem& sys) {
  const int d = sys.state_dim();
  const int m = sys.input_dim();
  Matrix kalman(d, d * m);
  Matrix block = sys.b();
  for (int k = 0; k < d; ++k) {
    kalman.middleCols(k * m, m) = block;
    block = sys.a() * block;
  }
  const Eigen::JacobiSVD<Matrix> svd(kalman);
  const Vector& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) <= 0.0) return false;
  const double cutoff = kRankRelativeThreshold * sv(0);
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cutoff) ++rank;
  }
  return rank == d;
}

void require_controllable(const LtiSystem& sys) {
  if (!check_controllability(sys)) {
    throw UncontrollableError(
        "(A, B) is not controllable: rank [B, AB, ..., A^{d-1}B] < d = " +
        std::to_string(sys.state_dim()));
  }
}

Matrix expm(const Eigen::Ref<const Matrix>& m, double s) {
  if (m.rows() != m.cols()) throw ShapeError("expm requires a square matrix, got " + dims(m));
  if (!std::isfinite(s) || !m.allFinite()) throw NumericError("expm input is not finite");
  const auto n = m.rows();
  if (n == 0) return Matrix(0, 0);

  Matrix a = m * s;
  const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
  Matrix u;
  Matrix v;
  int squarings = 0;
  if (norm1 <= kTheta3) {
    pade_low(a, kPade3, u, v);
  } else if (norm1 <= kTheta5) {
    pade_low(a, kPade5, u, v);
  } else if (norm1 <= kTheta7) {
    pade_low(a, kPade7, u, v);
  } else if (norm1 <= kTheta9) {
    pade_low(a, kPade9, u, v);
  } else {
    squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm1 / kTheta13))));
    a /= std::ldexp(1.0, squarings);
    pade13(a, u, v);
  }
  Matrix result = (v - u).partialPivLu().solve(v + u);
  for (int i = 0; i < squarings; ++i) result = result * result;
  if (!result.allFinite()) throw NumericError("expm overflowed");
  return result;
}

WindowOperators window_operators_unchecked(const LtiSystem& sys, double length) {
  if (!std::isfinite(length) || length < 0.0) {
    throw DomainError("window length must be non-negative, got " + std::to_string(length));
  }
  const int d = sys.state_dim();
  WindowOperators ops;
  ops.length = length;
  if (length == 0.0) {
    ops.phi = Matrix::Identity(d, d);
    ops.gramian = Matrix::Zero(d, d);
    return ops;
  }
  // Van Loan: exp([[-A, BB^T], [0, A^T]] L) = [[*, F12], [0, F22]] with
  // F22 = exp(A^T L) and W = F22^T F12.
  Matrix block = Matrix::Zero(2 * d, 2 * d);
  block.topLeftCorner(d, d) = -sys.a();
  block.topRightCorner(d, d) = sys.bbt();
  block.bottomRightCorner(d, d) = sys.a().transpose();
  const Matrix e = expm(block, length);

  ops.phi = e.bottomRightCorner(d, d).transpose();
  const Matrix w = ops.phi * e.topRightCorner(d, d);
  ops.gramian = 0.5 * (w + w.transpose());
  return ops;
}

WindowOperators window_operators(const LtiSystem& sys, double length) {
  if (!std::isfinite(length) || length <= 0.0) {
    throw DomainError("window length must be positive, got " + std::to_string(length));
  }
  WindowOperators ops = window_operators_unchecked(sys, length);

  const Eigen::LLT<Matrix> llt(ops.gramian);
  if (llt.info() != Eigen::Success) {
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(ops.gramian, Eigen::EigenvaluesOnly);
    const double min_eig = eig.eigenvalues().minCoeff();
    std::ostringstream os;
    os << "Gramian over window length " << length
       << " is not positive definite (min eigenvalue " << min_eig << ")";
    throw GramianSingularError(os.str(), min_eig);
  }
  return ops;
}

WindowOperators window_operators(const LtiSystem& sys, const TimeWindow& w) {
  return window_operators(sys, w.length());
}

Matrix gramian_quadrature(const LtiSystem& sys, double length, int nodes) {
  if (nodes < 8) throw DomainError("gramian_quadrature requires at least 8 nodes");
  if (!std::isfinite(length) || length <= 0.0) throw DomainError("window length must be positive");
  std::vector<double> x;
  std::vector<double> w;
  gauss_legendre(nodes, x, w);
  const int d = sys.state_dim();
  Matrix acc = Matrix::Zero(d, d);
  const double half = 0.5 * length;
  for (int i = 0; i < nodes; ++i) {
    // sigma = r - tau in [0, length]
    const double sigma = half * (x[i] + 1.0);
    const Matrix phi_b = expm(sys.a(), sigma) * sys.b();
    acc += (w[i] * half) * (phi_b * phi_b.transpose());
  }
  return acc;
}

Matrix gramian_quadrature(const LtiSystem& sys, const TimeWindow& w, int nodes) {
  return gramian_quadrature(sys, w.length(), nodes);
}

std::shared_ptr<const WindowOperators> WindowCache::get(double length) {
  const auto key = static_cast<std::int64_t>(std::llround(length * 1e9));
  if (auto it = entries_.find(key); it != entries_.end()) return it->second;
  if (entries_.size() >= max_entries_) entries_.clear();
  auto ops = std::make_shared<const WindowOperators>(window_operators(*sys_, length));
  entries_.emplace(key, ops);
  return ops;
}

}  // namespace swarmflow
