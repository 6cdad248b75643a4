// Symbolic triplet loss and batch-hard triplet mining.

#ifndef STP_LOSS_HPP
#define STP_LOSS_HPP

#include "stp/metric.hpp"

#include <algorithm>
#include <map>
#include <string>
#include <vector>

namespace stp {

inline constexpr double kDefaultMargin = 0.3;

template <typename Scalar = double>
struct Triplet {
  std::size_t anchor;
  std::size_t positive;
  std::size_t negative;
  Scalar loss;

  friend bool operator==(const Triplet&, const Triplet&) = default;
};

/// max(margin + d_ap - d_an, 0)
template <typename Scalar>
Scalar triplet_loss(Scalar d_ap, Scalar d_an, Scalar margin) {
  // Grouped so d_ap == d_an gives exactly `margin`.
  if (d_an >= d_ap + margin) return Scalar(0);
  return std::max(margin + (d_ap - d_an), Scalar(0));
}

template <typename Scalar>
Scalar symbolic_triplet_loss(const SymbolicRepresentation<Scalar>& anchor,
                             const SymbolicRepresentation<Scalar>& positive,
                             const SymbolicRepresentation<Scalar>& negative, Scalar margin,
                             DistanceMode mode) {
  return triplet_loss(rep_distance(anchor, positive, mode), rep_distance(anchor, negative, mode), margin);
}

/// Throws unless there are at least two labels and every label has two members.
inline void validate_mining_labels(const std::vector<std::string>& labels) {
  std::map<std::string, std::size_t> counts;
  for (const auto& l : labels) ++counts[l];
  if (counts.size() < 2) {
    throw Error(ErrorCode::InsufficientLabels,
                "need at least 2 distinct labels, got " + std::to_string(counts.size()));
  }
  for (const auto& [label, n] : counts) {
    if (n < 2) throw Error(ErrorCode::SingletonLabel, "label '" + label + "' has a single member");
  }
}

/// For every anchor, pairs the farthest same-label member with the nearest
/// other-label member. Ties go to the lowest index.
template <typename Scalar>
std::vector<Triplet<Scalar>> batch_hard_mine(const std::vector<SymbolicRepresentation<Scalar>>& reps,
                                             const std::vector<std::string>& labels, Scalar margin,
                                             DistanceMode mode) {
  if (reps.size() != labels.size()) {
    throw Error(ErrorCode::ShapeMismatch, "got " + std::to_string(reps.size()) + " representations but " +
                                              std::to_string(labels.size()) + " labels");
  }
  validate_mining_labels(labels);
  const auto dist = distance_matrix(reps, reps, mode);

  std::vector<Triplet<Scalar>> out;
  out.reserve(reps.size());
  for (std::size_t a = 0; a < reps.size(); ++a) {
    const auto row = dist.row(static_cast<Eigen::Index>(a));
    std::size_t pos = reps.size();
    std::size_t neg = reps.size();
    for (std::size_t j = 0; j < reps.size(); ++j) {
      const auto d = row(static_cast<Eigen::Index>(j));
      if (labels[j] == labels[a]) {
        if (j == a) continue;
        if (pos == reps.size() || d > row(static_cast<Eigen::Index>(pos))) pos = j;
      } else if (neg == reps.size() || d < row(static_cast<Eigen::Index>(neg))) {
        neg = j;
      }
    }
    out.push_back({a, pos, neg,
                   triplet_loss(row(static_cast<Eigen::Index>(pos)), row(static_cast<Eigen::Index>(neg)), margin)});
  }
  return out;
}

}  // namespace stp

#endif  // STP_LOSS_HPP
