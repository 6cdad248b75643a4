#include "stp/pipeline.hpp"

namespace stp::pipeline {

Pooling parse_pooling(const std::string& s) {
  if (s == "symbolic") return Pooling::Symbolic;
  if (s == "avg") return Pooling::Average;
  if (s == "max") return Pooling::Max;
  throw Error(ErrorCode::InvalidArgument, "unknown pooling '" + s + "' (expected symbolic, avg or max)");
}

const char* to_string(Pooling p) {
  switch (p) {
    case Pooling::Symbolic: return "symbolic";
    case Pooling::Average: return "avg";
    case Pooling::Max: return "max";
  }
  return "?";
}

LoadedSplit load_split(const std::filesystem::path& manifest_path, const io::Manifest& manifest, io::Split split) {
  LoadedSplit out;
  for (const auto& e : manifest.entries) {
    if (e.split != split) continue;
    out.tracklets.push_back({e.tracklet_id, e.camera,
                             io::load_tracklet(io::resolve(manifest_path, e), manifest.feature_dim)});
    out.labels.ids.push_back(e.identity);
    out.labels.cameras.push_back(e.camera);
  }
  return out;
}

io::RepresentationSet pool_split(const LoadedSplit& split, const PoolingConfig& cfg) {
  io::RepresentationSet set;
  set.labels = split.labels;
  set.reps.reserve(split.tracklets.size());
  for (const auto& t : split.tracklets) {
    set.tracklet_ids.push_back(t.id);
    set.reps.push_back(pool_tracklet(t, cfg));
  }
  return set;
}

namespace {

std::vector<Vector<double>> crisp(const LoadedSplit& split, Pooling p) {
  std::vector<Vector<double>> out;
  out.reserve(split.tracklets.size());
  for (const auto& t : split.tracklets) out.push_back(p == Pooling::Max ? max_pool(t) : avg_pool(t));
  return out;
}

}  // namespace

EvalReport evaluate_manifest(const std::filesystem::path& manifest_path, const RunConfig& cfg) {
  const auto manifest = io::load_manifest(manifest_path);
  const auto queries = load_split(manifest_path, manifest, io::Split::Query);
  const auto gallery = load_split(manifest_path, manifest, io::Split::Gallery);
  if (queries.tracklets.empty()) throw Error(ErrorCode::EmptyQuerySet, "manifest has no query entries");
  if (gallery.tracklets.empty()) throw Error(ErrorCode::EmptyGallerySet, "manifest has no gallery entries");

  if (cfg.pooling == Pooling::Symbolic) {
    const auto q = pool_split(queries, cfg.pooling_config);
    const auto g = pool_split(gallery, cfg.pooling_config);
    return evaluate(q.reps, q.labels, g.reps, g.labels, cfg.protocol, cfg.mode, cfg.workers);
  }
  return evaluate_distances(euclidean_distance_matrix(crisp(queries, cfg.pooling), crisp(gallery, cfg.pooling)),
                            queries.labels, gallery.labels, cfg.protocol);
}

}  // namespace stp::pipeline
