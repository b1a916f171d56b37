#include "relarb/measure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "relarb/error.hpp"
#include "relarb/rng.hpp"

namespace relarb {

EmpiricalMeasure::EmpiricalMeasure(Mat points, std::vector<double> weights)
    : points_(std::move(points)), weights_(std::move(weights)) {
  const std::size_t M = size();
  if (M == 0) throw DomainError("empirical measure needs at least one atom");
  if (!points_.allFinite()) throw DomainError("empirical measure atoms must be finite");
  if (weights_.empty()) {
    weights_.assign(M, 1.0 / static_cast<double>(M));
    uniform_ = true;
    return;
  }
  if (weights_.size() != M) throw DomainError("weight count differs from atom count");
  double total = 0.0;
  for (double w : weights_) {
    if (w < 0.0 || !std::isfinite(w)) throw DomainError("negative or non-finite weight");
    total += w;
  }
  if (!(total > 0.0)) throw DomainError("weights sum to zero");
  for (double& w : weights_) w /= total;
  uniform_ = std::all_of(weights_.begin(), weights_.end(),
                         [&](double w) { return w == weights_.front(); });
}

EmpiricalMeasure EmpiricalMeasure::from_values(std::span<const double> values) {
  Mat pts(static_cast<Eigen::Index>(values.size()), 1);
  for (std::size_t i = 0; i < values.size(); ++i) pts(static_cast<Eigen::Index>(i), 0) = values[i];
  return EmpiricalMeasure(std::move(pts));
}

double EmpiricalMeasure::integrate(const std::function<double(const Vec&)>& f) const {
  double s = 0.0;
  for (std::size_t i = 0; i < size(); ++i)
    s += weights_[i] * f(points_.row(static_cast<Eigen::Index>(i)).transpose());
  return s;
}

EmpiricalMeasure EmpiricalMeasure::scaled(double factor) const {
  return EmpiricalMeasure(points_ * factor, uniform_ ? std::vector<double>{} : weights_);
}

EmpiricalMeasure EmpiricalMeasure::projected(const Vec& direction) const {
  if (direction.size() != points_.cols()) throw DomainError("projection direction has wrong dimension");
  Mat p = points_ * direction;
  return EmpiricalMeasure(std::move(p), uniform_ ? std::vector<double>{} : weights_);
}

EmpiricalMeasure empirical_measure(const Mat& points, std::vector<double> weights) {
  return EmpiricalMeasure(points, std::move(weights));
}

namespace {

struct Atom {
  double x;
  double w;
};

std::vector<Atom> sorted_atoms(const EmpiricalMeasure& m) {
  std::vector<Atom> a(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) a[i] = {m.points()(static_cast<Eigen::Index>(i), 0), m.weights()[i]};
  std::stable_sort(a.begin(), a.end(), [](const Atom& p, const Atom& q) { return p.x < q.x; });
  return a;
}

double w2_squared_1d(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  if (a.dimension() != 1 || b.dimension() != 1) throw DomainError("wasserstein2_1d needs one-dimensional measures");
  const auto pa = sorted_atoms(a);
  const auto pb = sorted_atoms(b);
  if (a.uniform() && b.uniform() && pa.size() == pb.size()) {
    double s = 0.0;
    for (std::size_t i = 0; i < pa.size(); ++i) {
      const double d = pa[i].x - pb[i].x;
      s += d * d;
    }
    return s / static_cast<double>(pa.size());
  }
  // Sweep the merged breakpoints of both quantile functions.
  std::size_t i = 0, j = 0;
  double ra = pa[0].w, rb = pb[0].w, s = 0.0;
  while (i < pa.size() && j < pb.size()) {
    const double mass = std::min(ra, rb);
    const double d = pa[i].x - pb[j].x;
    s += mass * d * d;
    ra -= mass;
    rb -= mass;
    if (ra <= 1e-15) {
      if (++i < pa.size()) ra = pa[i].w;
    }
    if (rb <= 1e-15) {
      if (++j < pb.size()) rb = pb[j].w;
    }
  }
  return s;
}

}  // namespace

double wasserstein2_1d(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  return std::sqrt(std::max(0.0, w2_squared_1d(a, b)));
}

double sliced_wasserstein2(const EmpiricalMeasure& a, const EmpiricalMeasure& b, const Mat& directions) {
  if (a.dimension() != b.dimension()) throw DomainError("sliced W2 needs equal dimensions");
  if (directions.rows() < 1) throw DomainError("sliced W2 needs at least one projection");
  double s = 0.0;
  for (Eigen::Index p = 0; p < directions.rows(); ++p) {
    Vec dir = directions.row(p).transpose();
    const double norm = dir.norm();
    if (!(norm > 0.0)) throw DomainError("zero projection direction");
    dir /= norm;
    s += w2_squared_1d(a.projected(dir), b.projected(dir));
  }
  return std::sqrt(s / static_cast<double>(directions.rows()));
}

double sliced_wasserstein2(const EmpiricalMeasure& a, const EmpiricalMeasure& b, std::size_t n_projections,
                           std::uint64_t seed) {
  if (n_projections < 1) throw DomainError("sliced W2 needs at least one projection");
  const auto d = static_cast<Eigen::Index>(a.dimension());
  Mat dirs(static_cast<Eigen::Index>(n_projections), d);
  for (std::size_t p = 0; p < n_projections; ++p) {
    PathRng rng({seed, p, StreamPurpose::projection, 0});
    double norm = 0.0;
    while (!(norm > 1e-12)) {
      for (Eigen::Index j = 0; j < d; ++j) dirs(static_cast<Eigen::Index>(p), j) = rng.normal();
      norm = dirs.row(static_cast<Eigen::Index>(p)).norm();
    }
  }
  return sliced_wasserstein2(a, b, dirs);
}

std::vector<std::size_t> solve_assignment(const Mat& cost) {
  // Shortest augmenting path formulation with row/column potentials.
  const auto n = static_cast<std::size_t>(cost.rows());
  if (cost.cols() != cost.rows()) throw DomainError("assignment needs a square cost matrix");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assign(n);
  for (std::size_t j = 1; j <= n; ++j) assign[p[j] - 1] = j - 1;
  return assign;
}

double exact_wasserstein2(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  if (a.size() != b.size() || !a.uniform() || !b.uniform())
    throw DomainError("exact W2 needs uniform measures with equal atom counts");
  if (a.size() > 256) throw DomainError("exact W2 is limited to 256 atoms");
  if (a.dimension() != b.dimension()) throw DomainError("exact W2 needs equal dimensions");
  const auto M = static_cast<Eigen::Index>(a.size());
  Mat cost(M, M);
  for (Eigen::Index i = 0; i < M; ++i)
    for (Eigen::Index j = 0; j < M; ++j) cost(i, j) = (a.points().row(i) - b.points().row(j)).squaredNorm();
  const auto assign = solve_assignment(cost);
  double s = 0.0;
  for (Eigen::Index i = 0; i < M; ++i) s += cost(i, static_cast<Eigen::Index>(assign[static_cast<std::size_t>(i)]));
  return std::sqrt(s / static_cast<double>(M));
}

double conditional_mean(const Mat& inner_paths, std::size_t node) {
  if (inner_paths.cols() < 1) throw DomainError("conditional mean needs inner paths");
  const auto r = static_cast<Eigen::Index>(node);
  double s = 0.0;
  for (Eigen::Index k = 0; k < inner_paths.cols(); ++k) s += inner_paths(r, k);
  return s / static_cast<double>(inner_paths.cols());
}

}  // namespace relarb
