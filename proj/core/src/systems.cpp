#include "widthlab/systems.hpp"

#include <Eigen/Dense>
#include <bit>
#include <cmath>
#include <stdexcept>

#include "widthlab/parallel.hpp"

namespace widthlab {
namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

Eigen::VectorXd uniform_weights(Eigen::Index n) {
  return Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
}

void check_weights(const Eigen::VectorXd& weights, Eigen::Index points) {
  if (weights.size() != points)
    throw std::invalid_argument("FunctionSystem: weight count != sample rows");
  long double total = 0.0L;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (!(weights[i] > 0.0))
      throw std::invalid_argument("FunctionSystem: weights must be positive");
    total += weights[i];
  }
  if (points > 0 && std::abs(static_cast<double>(total) - 1.0) > 1e-9)
    throw std::invalid_argument("FunctionSystem: weights must sum to 1");
}

}  // namespace

void FunctionSystem::validate() const {
  check_weights(weights, points());
  if (!labels.empty() && static_cast<Eigen::Index>(labels.size()) != size())
    throw std::invalid_argument("FunctionSystem: label count != columns");
}

Eigen::MatrixXd FunctionSystem::weight_adjusted() const {
  return weights.cwiseSqrt().asDiagonal() * samples;
}

Eigen::MatrixXd FunctionSystem::gram() const {
  const Eigen::MatrixXd adjusted = weight_adjusted();
  return adjusted.transpose() * adjusted;
}

FunctionSystem FunctionSystem::from_samples(Eigen::MatrixXd samples) {
  const Eigen::Index m = samples.rows();
  FunctionSystem sys{std::move(samples), uniform_weights(m), {}, {}};
  return sys;
}

FunctionSystem FunctionSystem::from_samples(Eigen::MatrixXd samples,
                                            Eigen::VectorXd weights) {
  FunctionSystem sys{std::move(samples), std::move(weights), {}, {}};
  sys.validate();
  return sys;
}

void ComplexFunctionSystem::validate() const {
  check_weights(weights, points());
  if (!labels.empty() && static_cast<Eigen::Index>(labels.size()) != size())
    throw std::invalid_argument("ComplexFunctionSystem: label count != columns");
}

FunctionSystem walsh_system(int k) {
  if (k < 1 || k > 13)
    throw std::invalid_argument(
        "walsh_system: need 1 <= k <= 13 to materialize 2^{2k} entries");
  const Eigen::Index n = Eigen::Index(1) << k;
  Eigen::MatrixXd samples(n, n);
  for (Eigen::Index y = 0; y < n; ++y)
    for (Eigen::Index x = 0; x < n; ++x)
      samples(y, x) = walsh_entry(k, static_cast<std::uint64_t>(x),
                                  static_cast<std::uint64_t>(y));
  FunctionSystem sys = FunctionSystem::from_samples(std::move(samples));
  sys.grid = "binary cube {0,1}^" + std::to_string(k);
  return sys;
}

int walsh_entry(int k, std::uint64_t x, std::uint64_t y) {
  if (k < 1 || k > 62) throw std::invalid_argument("walsh_entry: need 1 <= k <= 62");
  const std::uint64_t mask = (std::uint64_t(1) << k) - 1;
  if (x > mask || y > mask)
    throw std::invalid_argument("walsh_entry: index outside {0,1}^k");
  return (std::popcount(x & y) & 1) ? -1 : 1;
}

std::complex<double> unit_root(double t) {
  return {std::cos(kTwoPi * t), std::sin(kTwoPi * t)};
}

ComplexFunctionSystem dft_system(Eigen::Index n) {
  if (n < 1 || n > 8192)
    throw std::invalid_argument("dft_system: need 1 <= N <= 8192 to materialize");
  Eigen::MatrixXcd samples(n, n);
  for (Eigen::Index y = 0; y < n; ++y)
    for (Eigen::Index x = 0; x < n; ++x) {
      const std::int64_t prod = (x * y) % n;
      samples(y, x) = unit_root(static_cast<double>(prod) / static_cast<double>(n));
    }
  ComplexFunctionSystem sys{std::move(samples), uniform_weights(n), {}, "Z_" + std::to_string(n)};
  return sys;
}

ComplexFunctionSystem trig_grid_system(int n_freq, int m_points) {
  if (n_freq < 0) throw std::invalid_argument("trig_grid_system: n_freq must be >= 0");
  if (m_points < 1) throw std::invalid_argument("trig_grid_system: m_points must be >= 1");
  const Eigen::Index cols = 2 * Eigen::Index(n_freq) + 1;
  if (Eigen::Index(m_points) * cols > kMaxMaterializedEntries)
    throw std::invalid_argument("trig_grid_system: too large to materialize");
  Eigen::MatrixXcd samples(m_points, cols);
  std::vector<std::string> labels(static_cast<std::size_t>(cols));
  for (int c = 0; c < cols; ++c) {
    const int freq = c - n_freq;
    labels[static_cast<std::size_t>(c)] = "e(" + std::to_string(freq) + "x)";
    for (int j = 0; j < m_points; ++j)
      samples(j, c) = unit_root(static_cast<double>(freq) * j / m_points);
  }
  ComplexFunctionSystem sys{std::move(samples), uniform_weights(m_points),
                            std::move(labels),
                            "torus grid j/" + std::to_string(m_points)};
  return sys;
}

FunctionSystem lacunary_system(const Eigen::VectorXd& profile_samples, double lambda,
                               int count) {
  const Eigen::Index grid = profile_samples.size();
  if (grid < 4) throw std::invalid_argument("lacunary_system: profile grid too small");
  if (lambda <= 1.0) throw std::invalid_argument("lacunary_system: need lambda > 1");
  if (count < 1) throw std::invalid_argument("lacunary_system: need count >= 1");

  std::vector<std::int64_t> freqs;
  freqs.reserve(static_cast<std::size_t>(count));
  std::int64_t k = 1;
  for (int j = 0; j < count; ++j) {
    freqs.push_back(k);
    const std::int64_t next_min = k + 1;
    const std::int64_t next_lac =
        static_cast<std::int64_t>(std::ceil(lambda * static_cast<double>(k) - 1e-12));
    k = std::max(next_min, next_lac);
  }
  if (freqs.back() > grid / 4)
    throw std::invalid_argument(
        "lacunary_system: top frequency exceeds grid/4; enlarge the profile grid");

  Eigen::MatrixXd samples(grid, count);
  std::vector<std::string> labels(static_cast<std::size_t>(count));
  for (int j = 0; j < count; ++j) {
    const std::int64_t kj = freqs[static_cast<std::size_t>(j)];
    labels[static_cast<std::size_t>(j)] = "phi(" + std::to_string(kj) + "x)";
    for (Eigen::Index i = 0; i < grid; ++i)
      samples(i, j) = profile_samples[(kj * i) % grid];
  }
  FunctionSystem sys = FunctionSystem::from_samples(std::move(samples));
  sys.labels = std::move(labels);
  sys.grid = "torus grid j/" + std::to_string(grid);
  return sys;
}

OneDimLaw OneDimLaw::point_mass(double value) {
  return {Kind::PointMass, value, 0.0};
}
OneDimLaw OneDimLaw::uniform(double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("OneDimLaw::uniform: lo > hi");
  return {Kind::Uniform, lo, hi};
}
OneDimLaw OneDimLaw::gaussian(double mean, double sd) {
  if (sd < 0.0) throw std::invalid_argument("OneDimLaw::gaussian: sd < 0");
  return {Kind::Gaussian, mean, sd};
}
OneDimLaw OneDimLaw::rademacher() { return {Kind::Rademacher, 0.0, 0.0}; }
OneDimLaw OneDimLaw::three_point(double eps, double magnitude) {
  if (eps < 0.0 || eps > 1.0)
    throw std::invalid_argument("OneDimLaw::three_point: eps outside [0,1]");
  return {Kind::ThreePoint, eps, magnitude};
}

double OneDimLaw::draw(Rng& rng) const {
  switch (kind) {
    case Kind::PointMass: return a;
    case Kind::Uniform: return a + (b - a) * rng.next_double();
    case Kind::Gaussian: return a + b * rng.next_gaussian();
    case Kind::Rademacher: return rng.next_sign();
    case Kind::ThreePoint: {
      const double u = rng.next_double();
      if (u >= a) return 0.0;
      return rng.next_sign() * b;
    }
  }
  throw std::logic_error("OneDimLaw::draw: unreachable");
}

RandomVectorModel RandomVectorModel::independent(Eigen::Index dim,
                                                 std::vector<OneDimLaw> laws) {
  RandomVectorModel m;
  m.kind = Kind::IndependentComponents;
  m.dim = dim;
  m.laws = std::move(laws);
  m.validate();
  return m;
}

RandomVectorModel RandomVectorModel::random_signs(Eigen::Index dim) {
  RandomVectorModel m;
  m.kind = Kind::RandomSigns;
  m.dim = dim;
  m.validate();
  return m;
}

RandomVectorModel RandomVectorModel::sparse_three_point(Eigen::Index dim, double eps,
                                                        double p) {
  RandomVectorModel m;
  m.kind = Kind::SparseThreePoint;
  m.dim = dim;
  m.eps = eps;
  m.p = p;
  m.K = std::pow(1.0 / eps, 1.0 / p);  // eps * K^p = 1
  m.validate();
  return m;
}

RandomVectorModel RandomVectorModel::uniform_from_columns(Eigen::MatrixXd columns) {
  RandomVectorModel m;
  m.kind = Kind::UniformFromColumns;
  m.dim = columns.rows();
  m.columns = std::move(columns);
  m.validate();
  return m;
}

void RandomVectorModel::validate() const {
  if (dim < 1) throw std::invalid_argument("RandomVectorModel: dim must be >= 1");
  switch (kind) {
    case Kind::IndependentComponents:
      if (laws.size() != 1 && laws.size() != static_cast<std::size_t>(dim))
        throw std::invalid_argument(
            "RandomVectorModel: need one shared law or one per coordinate");
      break;
    case Kind::SparseThreePoint:
      if (!(eps > 0.0) || eps > 1.0 || !(p > 0.0))
        throw std::invalid_argument("RandomVectorModel: need 0 < eps <= 1 and p > 0");
      break;
    case Kind::UniformFromColumns:
      if (columns.cols() < 1)
        throw std::invalid_argument("RandomVectorModel: empty column pool");
      break;
    case Kind::RandomSigns: break;
  }
}

Eigen::VectorXd RandomVectorModel::draw(Rng& rng) const {
  Eigen::VectorXd out(dim);
  switch (kind) {
    case Kind::RandomSigns:
      for (Eigen::Index i = 0; i < dim; ++i) out[i] = rng.next_sign();
      return out;
    case Kind::IndependentComponents: {
      const bool shared = laws.size() == 1;
      for (Eigen::Index i = 0; i < dim; ++i)
        out[i] = (shared ? laws[0] : laws[static_cast<std::size_t>(i)]).draw(rng);
      return out;
    }
    case Kind::SparseThreePoint:
      for (Eigen::Index i = 0; i < dim; ++i) {
        const double u = rng.next_double();
        out[i] = (u < eps) ? rng.next_sign() * K : 0.0;
      }
      return out;
    case Kind::UniformFromColumns: {
      const Eigen::Index pick =
          static_cast<Eigen::Index>(rng.next_below(static_cast<std::uint64_t>(columns.cols())));
      return columns.col(pick);
    }
  }
  throw std::logic_error("RandomVectorModel::draw: unreachable");
}

Eigen::VectorXd sample_one(const RandomVectorModel& model, std::uint64_t seed,
                           std::uint64_t trial) {
  Rng rng = Rng::stream(seed, trial);
  return model.draw(rng);
}

Eigen::MatrixXd sample(const RandomVectorModel& model, int trials, std::uint64_t seed) {
  model.validate();
  if (trials < 0) throw std::invalid_argument("sample: trials must be >= 0");
  Eigen::MatrixXd out(trials, model.dim);
  parallel_for(static_cast<std::size_t>(trials), [&](std::size_t t) {
    out.row(static_cast<Eigen::Index>(t)) =
        sample_one(model, seed, static_cast<std::uint64_t>(t)).transpose();
  });
  return out;
}

FunctionSystem piecewise_constant_random_system(Eigen::Index n, double delta,
                                                std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("piecewise_constant_random_system: n >= 1");
  if (!(delta > 0.0))
    throw std::invalid_argument("piecewise_constant_random_system: delta > 0");
  Eigen::MatrixXd samples(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(j));
    for (Eigen::Index i = 0; i < n; ++i) samples(i, j) = delta * rng.next_sign();
  }
  FunctionSystem sys = FunctionSystem::from_samples(std::move(samples));
  sys.grid = "dyadic cells on (0,1), " + std::to_string(n) + " pieces";
  return sys;
}

FunctionSystem random_orthonormal_system(Eigen::Index points, Eigen::Index size,
                                         std::uint64_t seed) {
  if (size < 1 || points < size)
    throw std::invalid_argument("random_orthonormal_system: need points >= size >= 1");
  Eigen::MatrixXd g(points, size);
  for (Eigen::Index j = 0; j < size; ++j) {
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(j));
    for (Eigen::Index i = 0; i < points; ++i) g(i, j) = rng.next_gaussian();
  }
  const Eigen::VectorXd w = uniform_weights(points);
  const Eigen::MatrixXd adjusted = w.cwiseSqrt().asDiagonal() * g;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(adjusted);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(points, size);
  // One re-orthogonalization pass tightens the Gram to ~1e-15.
  Eigen::HouseholderQR<Eigen::MatrixXd> qr2(q);
  q = qr2.householderQ() * Eigen::MatrixXd::Identity(points, size);
  Eigen::MatrixXd samples = w.cwiseSqrt().cwiseInverse().asDiagonal() * q;
  return FunctionSystem::from_samples(std::move(samples), w);
}

FunctionSystem orthonormal_completion(const FunctionSystem& phi) {
  phi.validate();
  const Eigen::Index m = phi.points();
  const Eigen::Index n = phi.size();
  const Eigen::MatrixXd g = phi.gram();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
      Eigen::MatrixXd((g + g.transpose()) / 2.0));
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("orthonormal_completion: eigendecomposition failed");
  const Eigen::VectorXd lam = eig.eigenvalues();
  if (lam.maxCoeff() > 1.0 + 1e-12)
    throw std::invalid_argument(
        "orthonormal_completion: ||Gram|| > 1, the system cannot be completed");

  // Bottom block on (1,2) with unit mass: Psi^T Psi / N = I - G.
  Eigen::VectorXd residual = (1.0 - lam.array()).matrix();
  for (Eigen::Index i = 0; i < residual.size(); ++i) {
    if (residual[i] < -1e-12)
      throw std::invalid_argument("orthonormal_completion: Gram exceeds identity");
    residual[i] = std::max(residual[i], 0.0);
  }
  const Eigen::MatrixXd sqrt_residual = eig.eigenvectors() *
                                        residual.cwiseSqrt().asDiagonal() *
                                        eig.eigenvectors().transpose();
  const Eigen::MatrixXd psi = std::sqrt(static_cast<double>(n)) * sqrt_residual;

  FunctionSystem out;
  out.samples.resize(m + n, n);
  out.samples.topRows(m) = phi.samples;
  out.samples.bottomRows(n) = psi;
  out.weights.resize(m + n);
  out.weights.head(m) = phi.weights / 2.0;
  out.weights.tail(n) =
      Eigen::VectorXd::Constant(n, 1.0 / (2.0 * static_cast<double>(n)));
  out.labels = phi.labels;
  out.grid = "doubled domain (0,2)";
  out.validate();
  return out;
}

}  // namespace widthlab
