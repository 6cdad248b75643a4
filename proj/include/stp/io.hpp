// File formats: dataset manifests, tracklet feature files (CSV and binary),
// representation files, and distance matrices. Layouts are documented in
// docs/formats.md. All multi-byte integers are little-endian.

#ifndef STP_IO_HPP
#define STP_IO_HPP

#include "stp/metric.hpp"
#include "stp/retrieval.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace stp::io {

namespace fs = std::filesystem;

inline constexpr std::uint8_t kFormatVersion = 1;

enum class Split { Query, Gallery, Train };

const char* to_string(Split s);
Split parse_split(const std::string& s);

struct ManifestEntry {
  std::string tracklet_id;
  std::string identity;
  std::string camera;
  Split split = Split::Gallery;
  fs::path path;  // as written; relative paths are relative to the manifest

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct Manifest {
  Eigen::Index feature_dim = 0;
  std::vector<ManifestEntry> entries;

  friend bool operator==(const Manifest&, const Manifest&) = default;
};

/// Parses and validates a manifest. With `check_files`, every referenced
/// feature file must exist and declare `feature_dim` columns.
Manifest load_manifest(const fs::path& path, bool check_files = true);
void save_manifest(const fs::path& path, const Manifest& manifest);

/// Location of an entry's feature file given the manifest's own path.
fs::path resolve(const fs::path& manifest_path, const ManifestEntry& entry);

FrameFeatureMatrix<double> load_tracklet_csv(const fs::path& path, Eigen::Index expected_cols);
void save_tracklet_csv(const fs::path& path, const FrameFeatureMatrix<double>& features);

FrameFeatureMatrix<double> load_tracklet_bin(const fs::path& path);
/// Values are narrowed to 32-bit floats on disk.
void save_tracklet_bin(const fs::path& path, const FrameFeatureMatrix<double>& features);

/// Dispatches on extension: ".csv" is text, anything else binary.
FrameFeatureMatrix<double> load_tracklet(const fs::path& path, Eigen::Index expected_cols);

/// Column count declared by a feature file, read without loading the payload.
Eigen::Index peek_feature_dim(const fs::path& path);

void save_representation(const fs::path& path, const SymbolicRepresentation<double>& rep);
SymbolicRepresentation<double> load_representation(const fs::path& path);

struct LabeledDistanceMatrix {
  DistanceMatrix<double> distances;
  std::vector<std::string> row_ids;
  std::vector<std::string> col_ids;
};

void save_distance_matrix(const fs::path& path, const DistanceMatrix<double>& d,
                          const std::vector<std::string>& row_ids, const std::vector<std::string>& col_ids);
LabeledDistanceMatrix load_distance_matrix(const fs::path& path);

/// A directory of representation files plus a labels.tsv index.
struct RepresentationSet {
  std::vector<std::string> tracklet_ids;
  Labels labels;
  std::vector<SymbolicRepresentation<double>> reps;
};

inline constexpr const char* kLabelsFile = "labels.tsv";

/// Writes <dir>/<tracklet_id>.rep per item and <dir>/labels.tsv.
void save_representation_set(const fs::path& dir, const RepresentationSet& set);

/// Reads the set listed in `labels_file` (default <dir>/labels.tsv).
RepresentationSet load_representation_set(const fs::path& dir, const fs::path& labels_file = {});

}  // namespace stp::io

#endif  // STP_IO_HPP
