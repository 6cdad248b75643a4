// Seeded synthetic tracklet datasets for desk-scale retrieval experiments.

#ifndef STP_SYNTH_HPP
#define STP_SYNTH_HPP

#include "stp/io.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace stp::synth {

enum class Scheme {
  /// Class-specific per-feature means, one shared spread.
  MeanSeparated,
  /// One shared per-feature mean, class-specific spreads. Frame averages
  /// carry no identity signal here; the per-feature distribution does.
  VarianceSeparated,
};

Scheme parse_scheme(const std::string& s);
const char* to_string(Scheme s);

struct Config {
  std::size_t classes = 5;
  std::size_t tracklets_per_class = 4;  // first half query, second half gallery
  Eigen::Index frames = 64;
  Eigen::Index features = 16;
  Scheme scheme = Scheme::VarianceSeparated;
  double noise = 0.05;  // per-tracklet jitter of the class parameters
  std::uint64_t seed = 73;

  void validate() const;
};

struct LabeledTracklet {
  Tracklet<double> tracklet;  // id and camera filled in
  std::string identity;
  io::Split split;
};

/// Generates the dataset in memory. Values are rounded to 32-bit floats so
/// they survive the binary tracklet format unchanged.
std::vector<LabeledTracklet> generate(const Config& cfg);

enum class FileFormat { Binary, Csv };

/// Writes <out>/manifest.tsv and one feature file per tracklet under
/// <out>/tracklets/. Returns the manifest path.
std::filesystem::path write_dataset(const Config& cfg, const std::filesystem::path& out,
                                    FileFormat format = FileFormat::Binary);

}  // namespace stp::synth

#endif  // STP_SYNTH_HPP
