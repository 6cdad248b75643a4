// Gallery ranking and CMC / mAP evaluation.

#ifndef STP_RETRIEVAL_HPP
#define STP_RETRIEVAL_HPP

#include "stp/metric.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace stp {

/// Identity and (optional, possibly empty) camera label per item.
struct Labels {
  std::vector<std::string> ids;
  std::vector<std::string> cameras;

  std::size_t size() const { return ids.size(); }
  const std::string& camera(std::size_t i) const {
    static const std::string kNone;
    return i < cameras.size() ? cameras[i] : kNone;
  }
};

struct EvalProtocol {
  bool compute_map = true;
  bool exclude_same_camera = false;
  std::vector<std::size_t> cmc_ranks{1, 5, 10, 20};

  /// CMC only, all gallery items kept (one gallery instance per probe).
  static EvalProtocol single_shot() { return {false, false, {1, 5, 10, 20}}; }
  /// CMC and mAP, all gallery items kept.
  static EvalProtocol multi_shot() { return {true, false, {1, 5, 10, 20}}; }
  /// CMC and mAP with same-camera gallery items dropped per query.
  static EvalProtocol cross_camera() { return {true, true, {1, 5, 10, 20}}; }
};

struct EvalReport {
  std::vector<std::pair<std::size_t, double>> cmc;
  std::optional<double> map;
  std::vector<RetrievalResult> per_query;
  std::size_t queries_without_match = 0;  // excluded from CMC
};

/// Orders gallery items by ascending distance, ties by ascending index.
/// Items whose camera equals `query_camera` are dropped when `exclude_camera`
/// is set and the query camera is non-empty.
template <typename Derived>
RetrievalResult rank_by_distances(const std::string& query_id, const std::string& query_camera,
                                  const Eigen::DenseBase<Derived>& distances, const Labels& gallery,
                                  bool exclude_camera = false) {
  const auto g_count = static_cast<std::size_t>(distances.size());
  if (g_count == 0) throw Error(ErrorCode::EmptyGallerySet, "cannot rank an empty gallery");
  if (gallery.size() != g_count) {
    throw Error(ErrorCode::ShapeMismatch, "distance row has " + std::to_string(g_count) + " entries but " +
                                              std::to_string(gallery.size()) + " gallery labels");
  }
  std::vector<std::size_t> order;
  order.reserve(g_count);
  for (std::size_t j = 0; j < g_count; ++j) {
    if (exclude_camera && !query_camera.empty() && gallery.camera(j) == query_camera) continue;
    order.push_back(j);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto da = distances(static_cast<Eigen::Index>(a));
    const auto db = distances(static_cast<Eigen::Index>(b));
    return da < db || (da == db && a < b);
  });

  RetrievalResult result;
  result.query_id = query_id;
  result.ranked_gallery.reserve(order.size());
  for (std::size_t j : order) {
    const bool relevant = gallery.ids[j] == query_id;
    result.relevant_count += relevant ? 1 : 0;
    result.ranked_gallery.push_back(
        {j, gallery.ids[j], static_cast<double>(distances(static_cast<Eigen::Index>(j))), relevant});
  }
  return result;
}

template <typename Scalar>
RetrievalResult rank_gallery(const SymbolicRepresentation<Scalar>& query, const std::string& query_id,
                             const std::vector<SymbolicRepresentation<Scalar>>& gallery,
                             const std::vector<std::string>& gallery_ids, DistanceMode mode) {
  if (gallery.empty()) throw Error(ErrorCode::EmptyGallerySet, "cannot rank an empty gallery");
  if (gallery_ids.size() != gallery.size()) {
    throw Error(ErrorCode::ShapeMismatch, "gallery and label counts differ");
  }
  Array<Scalar> d(static_cast<Eigen::Index>(gallery.size()));
  for (std::size_t j = 0; j < gallery.size(); ++j) d[static_cast<Eigen::Index>(j)] = rep_distance(query, gallery[j], mode);
  return rank_by_distances(query_id, std::string(), d, Labels{gallery_ids, {}});
}

/// 1-based position of the first relevant item, or 0 when there is none.
inline std::size_t first_hit(const RetrievalResult& r) {
  for (std::size_t p = 0; p < r.ranked_gallery.size(); ++p) {
    if (r.ranked_gallery[p].relevant) return p + 1;
  }
  return 0;
}

/// rate(k) = fraction of queries whose first relevant item sits at position <= k.
/// Queries without any relevant item are left out of the denominator.
inline std::vector<std::pair<std::size_t, double>> cmc(const std::vector<RetrievalResult>& results,
                                                       const std::vector<std::size_t>& ranks) {
  for (std::size_t k : ranks) {
    if (k == 0) throw Error(ErrorCode::InvalidArgument, "CMC ranks are 1-based");
    for (const auto& r : results) {
      if (k > r.ranked_gallery.size()) {
        throw Error(ErrorCode::RankExceedsGallery, "rank " + std::to_string(k) + " exceeds the " +
                                                       std::to_string(r.ranked_gallery.size()) +
                                                       "-item ranking of query " + r.query_id);
      }
    }
  }
  std::vector<std::size_t> hits;
  for (const auto& r : results) {
    if (auto p = first_hit(r); p > 0) hits.push_back(p);
  }
  std::vector<std::pair<std::size_t, double>> out;
  out.reserve(ranks.size());
  for (std::size_t k : ranks) {
    const auto n = std::count_if(hits.begin(), hits.end(), [k](std::size_t p) { return p <= k; });
    out.emplace_back(k, hits.empty() ? 0.0 : static_cast<double>(n) / static_cast<double>(hits.size()));
  }
  return out;
}

namespace detail {

// Extended-precision accumulation, rounded once by the callers, so that
// small hand-checkable cases come out as the nearest double.
inline long double average_precision_wide(const RetrievalResult& r) {
  if (r.relevant_count == 0) {
    throw Error(ErrorCode::NoRelevantItems, "query " + r.query_id + " has no relevant gallery item");
  }
  long double sum = 0.0L;
  std::size_t hits = 0;
  for (std::size_t p = 0; p < r.ranked_gallery.size(); ++p) {
    if (!r.ranked_gallery[p].relevant) continue;
    ++hits;
    sum += static_cast<long double>(hits) / static_cast<long double>(p + 1);
  }
  return sum / static_cast<long double>(r.relevant_count);
}

}  // namespace detail

inline double average_precision(const RetrievalResult& r) {
  return static_cast<double>(detail::average_precision_wide(r));
}

inline double mean_average_precision(const std::vector<RetrievalResult>& results) {
  if (results.empty()) throw Error(ErrorCode::EmptyQuerySet, "mAP over zero queries");
  long double sum = 0.0L;
  for (const auto& r : results) sum += detail::average_precision_wide(r);
  return static_cast<double>(sum / static_cast<long double>(results.size()));
}

/// Ranks every query row of a precomputed distance matrix, then scores CMC
/// and (when enabled) mAP.
template <typename Derived>
EvalReport evaluate_distances(const Eigen::DenseBase<Derived>& distances, const Labels& queries,
                              const Labels& gallery, const EvalProtocol& protocol) {
  if (distances.rows() == 0) throw Error(ErrorCode::EmptyQuerySet, "no queries");
  if (static_cast<std::size_t>(distances.rows()) != queries.size()) {
    throw Error(ErrorCode::ShapeMismatch, "distance rows and query labels differ");
  }
  EvalReport report;
  report.per_query.reserve(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    report.per_query.push_back(rank_by_distances(queries.ids[i], queries.camera(i),
                                                 distances.row(static_cast<Eigen::Index>(i)).transpose(),
                                                 gallery, protocol.exclude_same_camera));
  }
  for (const auto& r : report.per_query) {
    if (r.relevant_count == 0) ++report.queries_without_match;
  }
  report.cmc = cmc(report.per_query, protocol.cmc_ranks);
  if (protocol.compute_map) report.map = mean_average_precision(report.per_query);
  return report;
}

template <typename Scalar>
EvalReport evaluate(const std::vector<SymbolicRepresentation<Scalar>>& queries, const Labels& query_labels,
                    const std::vector<SymbolicRepresentation<Scalar>>& gallery, const Labels& gallery_labels,
                    const EvalProtocol& protocol, DistanceMode mode, std::size_t workers = 1) {
  if (queries.size() != query_labels.size() || gallery.size() != gallery_labels.size()) {
    throw Error(ErrorCode::ShapeMismatch, "representation and label counts differ");
  }
  return evaluate_distances(distance_matrix(queries, gallery, mode, workers), query_labels, gallery_labels,
                            protocol);
}

}  // namespace stp

#endif  // STP_RETRIEVAL_HPP
