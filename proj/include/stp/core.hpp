// Core value types for symbolic temporal pooling.
//
// Everything here is immutable after construction. Types are templated on the
// scalar used for in-memory accumulation; `double` is the default everywhere.

#ifndef STP_CORE_HPP
#define STP_CORE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace stp {

enum class ErrorCode {
  DimensionMismatch,
  NonFiniteValue,
  EmptyInput,
  NonpositiveBinCount,
  InvalidHistogram,
  TOutOfRange,
  ShapeMismatch,
  EmptyQuerySet,
  EmptyGallerySet,
  InsufficientLabels,
  SingletonLabel,
  RankExceedsGallery,
  NoRelevantItems,
  ParseError,
  DuplicatePath,
  DimMismatchDeclaration,
  RaggedRows,
  NonNumericToken,
  ColumnCountMismatch,
  BadMagic,
  TruncatedFile,
  VersionUnsupported,
  IoFailure,
  InvalidArgument,
};

inline const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Error raised for a non-finite entry; carries its zero-based position.
class NonFiniteError : public Error {
 public:
  NonFiniteError(Eigen::Index row, Eigen::Index col)
      : Error(ErrorCode::NonFiniteValue,
              "row " + std::to_string(row) + ", col " + std::to_string(col)),
        row_(row),
        col_(col) {}

  Eigen::Index row() const noexcept { return row_; }
  Eigen::Index col() const noexcept { return col_; }

 private:
  Eigen::Index row_;
  Eigen::Index col_;
};

inline const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "dimension-mismatch";
    case ErrorCode::NonFiniteValue: return "non-finite-value";
    case ErrorCode::EmptyInput: return "empty-input";
    case ErrorCode::NonpositiveBinCount: return "nonpositive-bin-count";
    case ErrorCode::InvalidHistogram: return "invalid-histogram";
    case ErrorCode::TOutOfRange: return "t-out-of-range";
    case ErrorCode::ShapeMismatch: return "shape-mismatch";
    case ErrorCode::EmptyQuerySet: return "empty-query-set";
    case ErrorCode::EmptyGallerySet: return "empty-gallery-set";
    case ErrorCode::InsufficientLabels: return "insufficient-labels";
    case ErrorCode::SingletonLabel: return "singleton-label";
    case ErrorCode::RankExceedsGallery: return "rank-exceeds-gallery";
    case ErrorCode::NoRelevantItems: return "no-relevant-items";
    case ErrorCode::ParseError: return "parse-error";
    case ErrorCode::DuplicatePath: return "duplicate-path";
    case ErrorCode::DimMismatchDeclaration: return "dim-mismatch-declaration";
    case ErrorCode::RaggedRows: return "ragged-rows";
    case ErrorCode::NonNumericToken: return "non-numeric-token";
    case ErrorCode::ColumnCountMismatch: return "column-count-mismatch";
    case ErrorCode::BadMagic: return "bad-magic";
    case ErrorCode::TruncatedFile: return "truncated-file";
    case ErrorCode::VersionUnsupported: return "version-unsupported";
    case ErrorCode::IoFailure: return "io-failure";
    case ErrorCode::InvalidArgument: return "invalid-argument";
  }
  return "unknown";
}

/// Absolute tolerance used when checking that histogram mass sums to one.
template <typename Scalar>
constexpr Scalar mass_tolerance() {
  if constexpr (std::is_same_v<Scalar, float>) {
    return Scalar(1e-5);
  } else {
    return Scalar(1e-9);
  }
}

/// N x M frame-level features: one row per frame, one column per feature.
template <typename Scalar = double>
using FrameFeatureMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar = double>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar = double>
using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

/// Checks that a raw row-major buffer describes a valid N x M feature matrix.
template <typename Scalar>
void validate_features(Eigen::Index rows, Eigen::Index cols, std::span<const Scalar> data) {
  if (rows < 1 || cols < 1) {
    throw Error(ErrorCode::DimensionMismatch,
                "feature matrix must be at least 1x1, got " + std::to_string(rows) + "x" +
                    std::to_string(cols));
  }
  if (static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) != data.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "expected " + std::to_string(rows * cols) + " values, got " +
                    std::to_string(data.size()));
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw NonFiniteError(static_cast<Eigen::Index>(i) / cols, static_cast<Eigen::Index>(i) % cols);
    }
  }
}

template <typename Scalar>
void validate_features(const FrameFeatureMatrix<Scalar>& features) {
  validate_features<Scalar>(features.rows(), features.cols(),
                            std::span<const Scalar>(features.data(), features.size()));
}

/// Builds a validated feature matrix from a row-major buffer.
template <typename Scalar>
FrameFeatureMatrix<Scalar> make_features(Eigen::Index rows, Eigen::Index cols,
                                         std::span<const Scalar> data) {
  validate_features<Scalar>(rows, cols, data);
  return Eigen::Map<const FrameFeatureMatrix<Scalar>>(data.data(), rows, cols);
}

template <typename Scalar = double>
struct Tracklet {
  std::string id;
  std::string camera;  // empty when unknown
  FrameFeatureMatrix<Scalar> features;

  Eigen::Index frames() const { return features.rows(); }
  Eigen::Index feature_dim() const { return features.cols(); }
};

/// Throws on the first violated tracklet invariant.
template <typename Scalar>
void validate_tracklet(const Tracklet<Scalar>& t) {
  validate_features(t.features);
}

/// Equal-width histogram of one feature's values over [lo, hi].
///
/// The cumulative array is always rebuilt from `freqs` by a running sum, so
/// cum[l] equals the floating-point prefix sum of the first l frequencies.
/// A point mass has lo == hi and a single bin holding all the mass.
template <typename Scalar = double>
class FeatureHistogram {
 public:
  FeatureHistogram(Scalar lo, Scalar hi, Array<Scalar> freqs)
      : lo_(lo), hi_(hi), freqs_(std::move(freqs)) {
    if (!std::isfinite(lo_) || !std::isfinite(hi_) || lo_ > hi_) {
      throw Error(ErrorCode::InvalidHistogram, "range must be finite with lo <= hi");
    }
    if (freqs_.size() < 1) {
      throw Error(ErrorCode::NonpositiveBinCount, "histogram needs at least one bin");
    }
    if (lo_ == hi_ && freqs_.size() != 1) {
      throw Error(ErrorCode::InvalidHistogram, "point mass must have exactly one bin");
    }
    cum_.resize(freqs_.size() + 1);
    cum_[0] = Scalar(0);
    for (Eigen::Index k = 0; k < freqs_.size(); ++k) {
      if (!std::isfinite(freqs_[k]) || freqs_[k] < Scalar(0)) {
        throw Error(ErrorCode::InvalidHistogram,
                    "bin " + std::to_string(k) + " has negative or non-finite mass");
      }
      cum_[k + 1] = cum_[k] + freqs_[k];
    }
    if (std::abs(cum_[freqs_.size()] - Scalar(1)) > mass_tolerance<Scalar>()) {
      throw Error(ErrorCode::InvalidHistogram, "bin masses must sum to 1");
    }
  }

  static FeatureHistogram point_mass(Scalar at) {
    return FeatureHistogram(at, at, Array<Scalar>::Ones(1));
  }

  Scalar lo() const { return lo_; }
  Scalar hi() const { return hi_; }
  Eigen::Index bin_count() const { return freqs_.size(); }
  const Array<Scalar>& freqs() const { return freqs_; }
  const Array<Scalar>& cum() const { return cum_; }
  bool is_point_mass() const { return lo_ == hi_; }

  Scalar bin_width() const { return (hi_ - lo_) / static_cast<Scalar>(bin_count()); }

  /// Edge k in [0, H]; edge(H) is exactly hi.
  Scalar edge(Eigen::Index k) const {
    return k == bin_count() ? hi_ : lo_ + static_cast<Scalar>(k) * bin_width();
  }

  friend bool operator==(const FeatureHistogram& a, const FeatureHistogram& b) {
    return a.lo_ == b.lo_ && a.hi_ == b.hi_ && a.freqs_.size() == b.freqs_.size() &&
           (a.freqs_ == b.freqs_).all();
  }

 private:
  Scalar lo_;
  Scalar hi_;
  Array<Scalar> freqs_;
  Array<Scalar> cum_;
};

enum class BinPolicy { Fixed, Sqrt };

struct PoolingConfig {
  BinPolicy bin_policy = BinPolicy::Sqrt;
  Eigen::Index fixed_bins = 1;  // used when bin_policy == Fixed
  Eigen::Index t_samples = 64;

  static PoolingConfig fixed(Eigen::Index bins, Eigen::Index t_samples = 64) {
    return {BinPolicy::Fixed, bins, t_samples};
  }
  static PoolingConfig sqrt(Eigen::Index t_samples = 64) {
    return {BinPolicy::Sqrt, 1, t_samples};
  }

  void validate() const {
    if (bin_policy == BinPolicy::Fixed && fixed_bins < 1) {
      throw Error(ErrorCode::NonpositiveBinCount, "fixed bin count must be >= 1");
    }
    if (t_samples < 1) {
      throw Error(ErrorCode::InvalidArgument, "t_samples must be >= 1");
    }
  }

  /// Bin count for a column of n values: ceil(sqrt(n)) under the sqrt policy.
  Eigen::Index bins_for(Eigen::Index n) const {
    if (bin_policy == BinPolicy::Fixed) return fixed_bins;
    Eigen::Index h = static_cast<Eigen::Index>(std::sqrt(static_cast<double>(n)));
    while (h * h < n) ++h;
    while (h > 1 && (h - 1) * (h - 1) >= n) --h;
    return std::max<Eigen::Index>(h, 1);
  }
};

struct RankedEntry {
  std::size_t gallery_index;
  std::string id;
  double distance;
  bool relevant;
};

struct RetrievalResult {
  std::string query_id;
  std::vector<RankedEntry> ranked_gallery;  // ascending distance
  std::size_t relevant_count = 0;
};

}  // namespace stp

#endif  // STP_CORE_HPP
