#include "stp/synth.hpp"

#include <cmath>
#include <cstdio>
#include <random>

namespace stp::synth {

namespace {

constexpr double kSharedSpread = 1.0;
constexpr double kMinSpread = 0.25;
constexpr double kMaxSpread = 2.0;

std::string numbered(const char* prefix, std::size_t n, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, n);
  return buf;
}

}  // namespace

Scheme parse_scheme(const std::string& s) {
  if (s == "mean-sep") return Scheme::MeanSeparated;
  if (s == "variance-sep") return Scheme::VarianceSeparated;
  throw Error(ErrorCode::InvalidArgument, "unknown scheme '" + s + "' (expected mean-sep or variance-sep)");
}

const char* to_string(Scheme s) {
  return s == Scheme::MeanSeparated ? "mean-sep" : "variance-sep";
}

void Config::validate() const {
  if (classes < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 classes");
  if (tracklets_per_class < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 tracklets per class");
  if (frames < 1 || features < 1) throw Error(ErrorCode::InvalidArgument, "frames and features must be >= 1");
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw Error(ErrorCode::InvalidArgument, "noise must be >= 0");
}

std::vector<LabeledTracklet> generate(const Config& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> log_spread(std::log(kMinSpread), std::log(kMaxSpread));

  const auto m_count = static_cast<std::size_t>(cfg.features);
  // Class parameters: mean[c][m], spread[c][m].
  std::vector<std::vector<double>> mean(cfg.classes, std::vector<double>(m_count));
  std::vector<std::vector<double>> spread(cfg.classes, std::vector<double>(m_count));
  std::vector<double> shared_mean(m_count);
  for (auto& v : shared_mean) v = normal(rng);
  for (std::size_t c = 0; c < cfg.classes; ++c) {
    for (std::size_t m = 0; m < m_count; ++m) {
      if (cfg.scheme == Scheme::MeanSeparated) {
        mean[c][m] = normal(rng);
        spread[c][m] = kSharedSpread;
      } else {
        mean[c][m] = shared_mean[m];
        spread[c][m] = std::exp(log_spread(rng));
      }
    }
  }

  const int class_width = cfg.classes > 999 ? 6 : 3;
  const std::size_t query_count = cfg.tracklets_per_class / 2;
  std::vector<LabeledTracklet> out;
  out.reserve(cfg.classes * cfg.tracklets_per_class);
  for (std::size_t c = 0; c < cfg.classes; ++c) {
    for (std::size_t k = 0; k < cfg.tracklets_per_class; ++k) {
      LabeledTracklet lt;
      lt.identity = numbered("id", c, class_width);
      lt.tracklet.id = lt.identity + numbered("_t", k, 2);
      lt.tracklet.camera = numbered("cam", k % 2, 1);
      lt.split = k < query_count ? io::Split::Query : io::Split::Gallery;

      std::vector<double> mu(m_count);
      std::vector<double> sigma(m_count);
      for (std::size_t m = 0; m < m_count; ++m) {
        mu[m] = mean[c][m] + cfg.noise * normal(rng);
        sigma[m] = spread[c][m] * std::exp(cfg.noise * normal(rng));
      }
      auto& f = lt.tracklet.features;
      f.resize(cfg.frames, cfg.features);
      for (Eigen::Index r = 0; r < cfg.frames; ++r) {
        for (Eigen::Index m = 0; m < cfg.features; ++m) {
          const auto mi = static_cast<std::size_t>(m);
          f(r, m) = static_cast<double>(static_cast<float>(mu[mi] + sigma[mi] * normal(rng)));
        }
      }
      out.push_back(std::move(lt));
    }
  }
  return out;
}

std::filesystem::path write_dataset(const Config& cfg, const std::filesystem::path& out, FileFormat format) {
  const auto tracklets = generate(cfg);
  std::error_code ec;
  std::filesystem::create_directories(out / "tracklets", ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create '" + (out / "tracklets").string() + "'");

  io::Manifest manifest;
  manifest.feature_dim = cfg.features;
  const char* ext = format == FileFormat::Csv ? ".csv" : ".bin";
  for (const auto& lt : tracklets) {
    const std::filesystem::path rel = std::filesystem::path("tracklets") / (lt.tracklet.id + ext);
    if (format == FileFormat::Csv) {
      io::save_tracklet_csv(out / rel, lt.tracklet.features);
    } else {
      io::save_tracklet_bin(out / rel, lt.tracklet.features);
    }
    manifest.entries.push_back({lt.tracklet.id, lt.identity, lt.tracklet.camera, lt.split, rel});
  }
  const auto manifest_path = out / "manifest.tsv";
  io::save_manifest(manifest_path, manifest);
  return manifest_path;
}

}  // namespace stp::synth
