// Distribution-valued pooling: per-feature histograms, their piecewise-linear
// ECDFs and quantile functions, and the fixed-grid quantile sampling used by
// the fast distance kernel.

#ifndef STP_SYMBOLIC_HPP
#define STP_SYMBOLIC_HPP

#include "stp/core.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace stp {

/// Equal-width histogram over [min(values), max(values)].
///
/// Values equal to the maximum land in the last bin. A constant input gives
/// a point mass regardless of `bin_count`.
template <typename Derived>
FeatureHistogram<typename Derived::Scalar> build_histogram(const Eigen::DenseBase<Derived>& values,
                                                           Eigen::Index bin_count) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = values.size();
  if (n < 1) throw Error(ErrorCode::EmptyInput, "cannot build a histogram from zero values");
  if (bin_count < 1) throw Error(ErrorCode::NonpositiveBinCount, "bin_count must be >= 1");

  const Scalar lo = values.minCoeff();
  const Scalar hi = values.maxCoeff();
  if (!std::isfinite(lo) || !std::isfinite(hi)) {
    throw Error(ErrorCode::NonFiniteValue, "histogram input contains a non-finite value");
  }
  if (lo == hi) return FeatureHistogram<Scalar>::point_mass(lo);

  const Scalar width = (hi - lo) / static_cast<Scalar>(bin_count);
  std::vector<Eigen::Index> counts(static_cast<std::size_t>(bin_count), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto k = static_cast<Eigen::Index>((values(i) - lo) / width);
    counts[static_cast<std::size_t>(std::clamp<Eigen::Index>(k, 0, bin_count - 1))] += 1;
  }
  Array<Scalar> freqs(bin_count);
  for (Eigen::Index k = 0; k < bin_count; ++k) {
    freqs[k] = static_cast<Scalar>(counts[static_cast<std::size_t>(k)]) / static_cast<Scalar>(n);
  }
  return FeatureHistogram<Scalar>(lo, hi, std::move(freqs));
}

/// Piecewise-linear ECDF, interpolating the cumulative weight inside each bin.
template <typename Scalar>
Scalar ecdf_eval(const FeatureHistogram<Scalar>& h, Scalar p) {
  if (h.is_point_mass()) return p < h.lo() ? Scalar(0) : Scalar(1);
  if (p <= h.lo()) return Scalar(0);
  if (p >= h.hi()) return Scalar(1);

  const Eigen::Index bins = h.bin_count();
  const Scalar width = h.bin_width();
  const auto b = std::clamp<Eigen::Index>(static_cast<Eigen::Index>((p - h.lo()) / width), 0, bins - 1);
  const auto& cum = h.cum();
  const Scalar v = cum[b] + h.freqs()[b] * (p - h.edge(b)) / width;
  // Clamping into the bin's cumulative span keeps the curve monotone across edges.
  return std::clamp(v, cum[b], std::min(cum[b + 1], Scalar(1)));
}

/// Left-continuous generalized inverse of ecdf_eval. Zero-mass bins are jumped.
template <typename Scalar>
Scalar quantile_eval(const FeatureHistogram<Scalar>& h, Scalar t) {
  if (!(t >= Scalar(0) && t <= Scalar(1))) {
    throw Error(ErrorCode::TOutOfRange, "t = " + std::to_string(t) + " is outside [0, 1]");
  }
  if (h.is_point_mass() || t == Scalar(0)) return h.lo();
  if (t == Scalar(1)) return h.hi();

  const auto& cum = h.cum();
  const Eigen::Index bins = h.bin_count();
  // The running sum may end a hair below 1.
  t = std::min(t, cum[bins]);
  const Scalar* first = cum.data() + 1;
  const auto b = static_cast<Eigen::Index>(std::lower_bound(first, first + bins, t) - first);
  const Scalar x = h.edge(b) + h.bin_width() * (t - cum[b]) / h.freqs()[b];
  return std::clamp(x, h.edge(b), h.edge(b + 1));
}

/// Generalized inverse of a histogram's piecewise-linear ECDF.
template <typename Scalar = double>
class QuantileFunction {
 public:
  explicit QuantileFunction(FeatureHistogram<Scalar> h) : hist_(std::move(h)) {}

  const FeatureHistogram<Scalar>& histogram() const { return hist_; }
  Scalar lo() const { return hist_.lo(); }
  Scalar hi() const { return hist_.hi(); }

  Scalar operator()(Scalar t) const { return quantile_eval(hist_, t); }

  friend bool operator==(const QuantileFunction& a, const QuantileFunction& b) {
    return a.hist_ == b.hist_;
  }

 private:
  FeatureHistogram<Scalar> hist_;
};

template <typename Scalar>
Scalar quantile_eval(const QuantileFunction<Scalar>& q, Scalar t) {
  return quantile_eval(q.histogram(), t);
}

/// Midpoint grid t_k = (k + 1/2) / T, k = 0..T-1.
template <typename Scalar>
Scalar midpoint(Eigen::Index k, Eigen::Index t_samples) {
  return static_cast<Scalar>(2 * k + 1) / static_cast<Scalar>(2 * t_samples);
}

/// Concatenates each feature's quantile function sampled on the midpoint grid.
template <typename Scalar>
Array<Scalar> sample_quantiles(const std::vector<QuantileFunction<Scalar>>& per_feature,
                               Eigen::Index t_samples) {
  if (t_samples < 1) throw Error(ErrorCode::InvalidArgument, "t_samples must be >= 1");
  const auto m_count = static_cast<Eigen::Index>(per_feature.size());
  Array<Scalar> out(m_count * t_samples);
  for (Eigen::Index m = 0; m < m_count; ++m) {
    for (Eigen::Index k = 0; k < t_samples; ++k) {
      out[m * t_samples + k] = per_feature[static_cast<std::size_t>(m)](midpoint<Scalar>(k, t_samples));
    }
  }
  return out;
}

/// M quantile functions plus their concatenated midpoint samples (M x T).
template <typename Scalar = double>
class SymbolicRepresentation {
 public:
  SymbolicRepresentation(std::vector<QuantileFunction<Scalar>> per_feature, Eigen::Index t_samples)
      : per_feature_(std::move(per_feature)), t_samples_(t_samples) {
    if (per_feature_.empty()) throw Error(ErrorCode::EmptyInput, "representation needs >= 1 feature");
    sampled_ = sample_quantiles(per_feature_, t_samples_);
  }

  Eigen::Index feature_dim() const { return static_cast<Eigen::Index>(per_feature_.size()); }
  Eigen::Index t_samples() const { return t_samples_; }
  const std::vector<QuantileFunction<Scalar>>& per_feature() const { return per_feature_; }
  const QuantileFunction<Scalar>& feature(Eigen::Index m) const {
    return per_feature_[static_cast<std::size_t>(m)];
  }

  /// Feature m occupies [m*T, (m+1)*T).
  const Array<Scalar>& sampled() const { return sampled_; }

  friend bool operator==(const SymbolicRepresentation& a, const SymbolicRepresentation& b) {
    return a.t_samples_ == b.t_samples_ && a.per_feature_ == b.per_feature_;
  }

 private:
  std::vector<QuantileFunction<Scalar>> per_feature_;
  Eigen::Index t_samples_;
  Array<Scalar> sampled_;
};

template <typename Scalar>
const Array<Scalar>& sample_quantiles(const SymbolicRepresentation<Scalar>& rep) {
  return rep.sampled();
}

/// One quantile function per feature column, bins chosen by `cfg`.
template <typename Scalar>
SymbolicRepresentation<Scalar> pool_features(const FrameFeatureMatrix<Scalar>& features,
                                             const PoolingConfig& cfg) {
  cfg.validate();
  validate_features(features);
  const Eigen::Index bins = cfg.bins_for(features.rows());
  std::vector<QuantileFunction<Scalar>> per_feature;
  per_feature.reserve(static_cast<std::size_t>(features.cols()));
  for (Eigen::Index m = 0; m < features.cols(); ++m) {
    per_feature.emplace_back(build_histogram(features.col(m), bins));
  }
  return SymbolicRepresentation<Scalar>(std::move(per_feature), cfg.t_samples);
}

template <typename Scalar>
SymbolicRepresentation<Scalar> pool_tracklet(const Tracklet<Scalar>& t, const PoolingConfig& cfg) {
  return pool_features(t.features, cfg);
}

}  // namespace stp

#endif  // STP_SYMBOLIC_HPP
