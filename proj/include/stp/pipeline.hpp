// End-to-end runs over a manifest: load, pool, rank, score.

#ifndef STP_PIPELINE_HPP
#define STP_PIPELINE_HPP

#include "stp/io.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace stp::pipeline {

enum class Pooling { Symbolic, Average, Max };

Pooling parse_pooling(const std::string& s);
const char* to_string(Pooling p);

/// Tracklets of one split, in manifest order.
struct LoadedSplit {
  std::vector<Tracklet<double>> tracklets;
  Labels labels;
};

LoadedSplit load_split(const std::filesystem::path& manifest_path, const io::Manifest& manifest, io::Split split);

io::RepresentationSet pool_split(const LoadedSplit& split, const PoolingConfig& cfg);

struct RunConfig {
  Pooling pooling = Pooling::Symbolic;
  PoolingConfig pooling_config{};
  DistanceMode mode = DistanceMode::Sampled;
  EvalProtocol protocol = EvalProtocol::multi_shot();
  std::size_t workers = 1;
};

/// Query split against gallery split. Symbolic pooling is scored with the
/// chosen W1 mode; average and max pooling with Euclidean distance.
EvalReport evaluate_manifest(const std::filesystem::path& manifest_path, const RunConfig& cfg);

}  // namespace stp::pipeline

#endif  // STP_PIPELINE_HPP
