// 1-D Wasserstein distances between quantile functions, pooled-vector
// baselines, and the batch distance-matrix kernel.

#ifndef STP_METRIC_HPP
#define STP_METRIC_HPP

#include "stp/core.hpp"
#include "stp/symbolic.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <thread>
#include <vector>

namespace stp {

enum class DistanceMode { Exact, Sampled };

template <typename Scalar = double>
using DistanceMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace detail {

// One linear piece of a quantile function: x(t) = base + slope * (t - t0) on [t0, t1].
template <typename Scalar>
struct QuantilePiece {
  Scalar t0;
  Scalar t1;
  Scalar base;
  Scalar slope;

  Scalar at(Scalar t) const { return base + slope * (t - t0); }
};

template <typename Scalar>
std::vector<QuantilePiece<Scalar>> quantile_pieces(const FeatureHistogram<Scalar>& h) {
  std::vector<QuantilePiece<Scalar>> pieces;
  if (h.is_point_mass()) {
    pieces.push_back({Scalar(0), Scalar(1), h.lo(), Scalar(0)});
    return pieces;
  }
  const auto& cum = h.cum();
  const auto& freqs = h.freqs();
  const Scalar width = h.bin_width();
  for (Eigen::Index k = 0; k < h.bin_count(); ++k) {
    if (!(cum[k + 1] > cum[k])) continue;
    pieces.push_back({cum[k], cum[k + 1], h.edge(k), width / freqs[k]});
  }
  // The running sum may stop a hair short of 1; stretch the last piece to cover [0, 1].
  pieces.back().t1 = Scalar(1);
  return pieces;
}

// Integral of |d(t)| over an interval of length dt where d is linear with end values d0, d1.
template <typename Scalar>
Scalar abs_linear_integral(Scalar d0, Scalar d1, Scalar dt) {
  const Scalar a0 = std::abs(d0);
  const Scalar a1 = std::abs(d1);
  if ((d0 >= Scalar(0)) == (d1 >= Scalar(0)) || a0 == Scalar(0) || a1 == Scalar(0)) {
    return Scalar(0.5) * (a0 + a1) * dt;
  }
  // Sign change: two triangles meeting at the root.
  return (d0 * d0 + d1 * d1) / (Scalar(2) * (a0 + a1)) * dt;
}

}  // namespace detail

/// Exact integral over [0, 1] of |Qa(t) - Qb(t)|.
///
/// Both quantile functions are piecewise linear in t, so the integral is
/// evaluated in closed form on the merged breakpoint grid, splitting each
/// merged piece at the root of the difference when the sign changes.
template <typename Scalar>
Scalar w1_exact(const FeatureHistogram<Scalar>& a, const FeatureHistogram<Scalar>& b) {
  const auto pa = detail::quantile_pieces(a);
  const auto pb = detail::quantile_pieces(b);
  std::size_t ia = 0;
  std::size_t ib = 0;
  Scalar t = Scalar(0);
  Scalar total = Scalar(0);
  while (ia < pa.size() && ib < pb.size()) {
    const auto& sa = pa[ia];
    const auto& sb = pb[ib];
    const Scalar next = std::min(sa.t1, sb.t1);
    if (next > t) {
      const Scalar d0 = sa.at(t) - sb.at(t);
      const Scalar d1 = sa.at(next) - sb.at(next);
      total += detail::abs_linear_integral(d0, d1, next - t);
      t = next;
    }
    if (sa.t1 <= next) ++ia;
    if (sb.t1 <= next) ++ib;
  }
  return total;
}

template <typename Scalar>
Scalar w1_exact(const QuantileFunction<Scalar>& a, const QuantileFunction<Scalar>& b) {
  return w1_exact(a.histogram(), b.histogram());
}

/// Sum of |a[i] - b[i]| with a fixed eight-lane accumulation order.
///
/// Every L1 evaluation in the library goes through here, so pairwise and
/// batched distances agree bit for bit.
template <typename Scalar>
Scalar l1_distance(const Scalar* a, const Scalar* b, Eigen::Index n) {
  constexpr int kLanes = 8;
  Scalar acc[kLanes] = {};
  Eigen::Index i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    for (int l = 0; l < kLanes; ++l) acc[l] += std::abs(a[i + l] - b[i + l]);
  }
  for (int l = 0; i < n; ++i, ++l) acc[l] += std::abs(a[i] - b[i]);
  return ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
}

template <typename Scalar>
void check_same_shape(const SymbolicRepresentation<Scalar>& a, const SymbolicRepresentation<Scalar>& b,
                      DistanceMode mode) {
  if (a.feature_dim() != b.feature_dim()) {
    throw Error(ErrorCode::ShapeMismatch, "feature counts differ: " + std::to_string(a.feature_dim()) +
                                              " vs " + std::to_string(b.feature_dim()));
  }
  if (mode == DistanceMode::Sampled && a.t_samples() != b.t_samples()) {
    throw Error(ErrorCode::ShapeMismatch, "sample counts differ: " + std::to_string(a.t_samples()) +
                                              " vs " + std::to_string(b.t_samples()));
  }
}

/// (1/T) * sum over features and midpoints of the absolute quantile difference.
template <typename Scalar>
Scalar w1_sampled(const SymbolicRepresentation<Scalar>& a, const SymbolicRepresentation<Scalar>& b) {
  check_same_shape(a, b, DistanceMode::Sampled);
  return l1_distance(a.sampled().data(), b.sampled().data(), a.sampled().size()) /
         static_cast<Scalar>(a.t_samples());
}

template <typename Scalar>
Scalar rep_distance(const SymbolicRepresentation<Scalar>& a, const SymbolicRepresentation<Scalar>& b,
                    DistanceMode mode) {
  if (mode == DistanceMode::Sampled) return w1_sampled(a, b);
  check_same_shape(a, b, mode);
  Scalar total = Scalar(0);
  for (Eigen::Index m = 0; m < a.feature_dim(); ++m) total += w1_exact(a.feature(m), b.feature(m));
  return total;
}

namespace detail {

// Runs body(row_begin, row_end) over `rows` split into contiguous chunks.
template <typename Body>
void parallel_rows(Eigen::Index rows, std::size_t workers, Body&& body) {
  const auto w = static_cast<Eigen::Index>(std::clamp<std::size_t>(workers, 1, static_cast<std::size_t>(rows)));
  if (w <= 1) {
    body(Eigen::Index(0), rows);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(static_cast<std::size_t>(w));
  for (Eigen::Index i = 0; i < w; ++i) {
    const Eigen::Index begin = rows * i / w;
    const Eigen::Index end = rows * (i + 1) / w;
    pool.emplace_back([&body, begin, end] { body(begin, end); });
  }
}

}  // namespace detail

/// Entry (i, j) = rep_distance(queries[i], gallery[j], mode).
///
/// Rows are split across `workers` threads; every entry is computed
/// independently, so the result does not depend on the worker count.
template <typename Scalar>
DistanceMatrix<Scalar> distance_matrix(const std::vector<SymbolicRepresentation<Scalar>>& queries,
                                       const std::vector<SymbolicRepresentation<Scalar>>& gallery,
                                       DistanceMode mode, std::size_t workers = 1) {
  if (queries.empty()) throw Error(ErrorCode::EmptyQuerySet, "no query representations");
  if (gallery.empty()) throw Error(ErrorCode::EmptyGallerySet, "no gallery representations");
  const auto& ref = queries.front();
  for (const auto& q : queries) check_same_shape(ref, q, mode);
  for (const auto& g : gallery) check_same_shape(ref, g, mode);

  const auto q_count = static_cast<Eigen::Index>(queries.size());
  const auto g_count = static_cast<Eigen::Index>(gallery.size());
  DistanceMatrix<Scalar> out(q_count, g_count);

  if (mode == DistanceMode::Exact) {
    detail::parallel_rows(q_count, workers, [&](Eigen::Index begin, Eigen::Index end) {
      for (Eigen::Index i = begin; i < end; ++i) {
        for (Eigen::Index j = 0; j < g_count; ++j) {
          out(i, j) = rep_distance(queries[static_cast<std::size_t>(i)],
                                   gallery[static_cast<std::size_t>(j)], DistanceMode::Exact);
        }
      }
    });
    return out;
  }

  const Eigen::Index dim = ref.sampled().size();
  const auto t_count = static_cast<Scalar>(ref.t_samples());
  // Gallery tiles sized to stay cache resident while a query chunk streams past.
  const Eigen::Index tile =
      std::max<Eigen::Index>(1, (Eigen::Index(1) << 19) / (dim * static_cast<Eigen::Index>(sizeof(Scalar))));
  detail::parallel_rows(q_count, workers, [&](Eigen::Index begin, Eigen::Index end) {
    for (Eigen::Index j0 = 0; j0 < g_count; j0 += tile) {
      const Eigen::Index j1 = std::min(g_count, j0 + tile);
      for (Eigen::Index i = begin; i < end; ++i) {
        const Scalar* q = queries[static_cast<std::size_t>(i)].sampled().data();
        for (Eigen::Index j = j0; j < j1; ++j) {
          out(i, j) = l1_distance(q, gallery[static_cast<std::size_t>(j)].sampled().data(), dim) / t_count;
        }
      }
    }
  });
  return out;
}

/// Column-wise mean over frames.
template <typename Scalar>
Vector<Scalar> avg_pool(const FrameFeatureMatrix<Scalar>& features) {
  validate_features(features);
  return features.colwise().mean().transpose();
}

/// Column-wise maximum over frames.
template <typename Scalar>
Vector<Scalar> max_pool(const FrameFeatureMatrix<Scalar>& features) {
  validate_features(features);
  return features.colwise().maxCoeff().transpose();
}

template <typename Scalar>
Vector<Scalar> avg_pool(const Tracklet<Scalar>& t) {
  return avg_pool(t.features);
}

template <typename Scalar>
Vector<Scalar> max_pool(const Tracklet<Scalar>& t) {
  return max_pool(t.features);
}

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar euclidean(const Eigen::MatrixBase<DerivedA>& u, const Eigen::MatrixBase<DerivedB>& v) {
  if (u.size() != v.size()) {
    throw Error(ErrorCode::ShapeMismatch,
                "vector lengths differ: " + std::to_string(u.size()) + " vs " + std::to_string(v.size()));
  }
  return (u - v).norm();
}

/// Euclidean distances between pooled vectors (the crisp baseline).
template <typename Scalar>
DistanceMatrix<Scalar> euclidean_distance_matrix(const std::vector<Vector<Scalar>>& queries,
                                                 const std::vector<Vector<Scalar>>& gallery) {
  if (queries.empty()) throw Error(ErrorCode::EmptyQuerySet, "no query vectors");
  if (gallery.empty()) throw Error(ErrorCode::EmptyGallerySet, "no gallery vectors");
  DistanceMatrix<Scalar> out(static_cast<Eigen::Index>(queries.size()), static_cast<Eigen::Index>(gallery.size()));
  for (std::size_t i = 0; i < queries.size(); ++i) {
    for (std::size_t j = 0; j < gallery.size(); ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = euclidean(queries[i], gallery[j]);
    }
  }
  return out;
}

}  // namespace stp

#endif  // STP_METRIC_HPP
