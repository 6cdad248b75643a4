// stp: pool tracklets into symbolic representations, compare, rank, score.

#include "stp/stp.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <thread>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const CLI::Range kPositive(1L, 1L << 30, "POSITIVE");

std::size_t default_threads() {
  if (const char* env = std::getenv("STP_THREADS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    std::cerr << "warning: ignoring STP_THREADS='" << env << "'\n";
  }
  return 1;
}

stp::DistanceMode parse_mode(const std::string& s) {
  return s == "exact" ? stp::DistanceMode::Exact : stp::DistanceMode::Sampled;
}

// "sqrt" or a positive integer.
stp::PoolingConfig pooling_config(const std::string& bins, long t_samples) {
  stp::PoolingConfig cfg = stp::PoolingConfig::sqrt(t_samples);
  if (bins != "sqrt") {
    std::size_t used = 0;
    long h = 0;
    try {
      h = std::stol(bins, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != bins.size()) throw CLI::ValidationError("--bins", "expected 'sqrt' or a positive integer");
    cfg = stp::PoolingConfig::fixed(h, t_samples);
  }
  cfg.validate();
  return cfg;
}

stp::EvalProtocol protocol_named(const std::string& name) {
  if (name == "single-shot") return stp::EvalProtocol::single_shot();
  if (name == "cross-camera") return stp::EvalProtocol::cross_camera();
  return stp::EvalProtocol::multi_shot();
}

json report_json(const stp::EvalReport& r, const std::string& protocol, const std::string& method) {
  json j;
  j["protocol"] = protocol;
  j["method"] = method;
  json cmc = json::object();
  for (const auto& [k, v] : r.cmc) cmc[std::to_string(k)] = v;
  j["cmc"] = cmc;
  j["map"] = r.map ? json(*r.map) : json(nullptr);
  j["queries"] = r.per_query.size();
  j["queries_without_match"] = r.queries_without_match;
  json per = json::array();
  for (const auto& q : r.per_query) {
    per.push_back({{"query", q.query_id},
                   {"first_hit", stp::first_hit(q)},
                   {"relevant", q.relevant_count}});
  }
  j["per_query"] = per;
  return j;
}

void print_rank_list(const stp::RetrievalResult& r, const std::vector<std::string>& gallery_tracklets,
                     std::size_t top) {
  const std::size_t n = top == 0 ? r.ranked_gallery.size() : std::min(top, r.ranked_gallery.size());
  for (std::size_t p = 0; p < n; ++p) {
    const auto& e = r.ranked_gallery[p];
    std::cout << r.query_id << '\t' << (p + 1) << '\t' << gallery_tracklets[e.gallery_index] << '\t' << e.id
              << '\t' << std::setprecision(17) << e.distance << '\t' << (e.relevant ? 1 : 0) << '\n';
  }
}

// Drops CMC ranks beyond the gallery so small sets still report.
std::vector<std::size_t> usable_ranks(std::vector<std::size_t> ranks, std::size_t gallery_size) {
  std::vector<std::size_t> kept;
  for (auto k : ranks) {
    if (k <= gallery_size) {
      kept.push_back(k);
    } else {
      std::cerr << "warning: dropping CMC rank " << k << " (gallery has " << gallery_size << " items)\n";
    }
  }
  return kept;
}

struct PoolArgs {
  std::string manifest;
  std::string bins = "sqrt";
  long t_samples = 64;
  std::string out;
};

int run_pool(const PoolArgs& a) {
  const auto cfg = pooling_config(a.bins, a.t_samples);
  const fs::path manifest_path = a.manifest;
  const auto manifest = stp::io::load_manifest(manifest_path);
  std::size_t written = 0;
  for (auto split : {stp::io::Split::Query, stp::io::Split::Gallery, stp::io::Split::Train}) {
    const auto loaded = stp::pipeline::load_split(manifest_path, manifest, split);
    if (loaded.tracklets.empty()) continue;
    const auto set = stp::pipeline::pool_split(loaded, cfg);
    stp::io::save_representation_set(fs::path(a.out) / stp::io::to_string(split), set);
    written += set.reps.size();
  }
  std::cout << "entries " << written << "\nfeatures " << manifest.feature_dim << "\nbins " << a.bins
            << "\nt_samples " << cfg.t_samples << "\nout " << a.out << '\n';
  return 0;
}

struct PairArgs {
  std::string query;
  std::string gallery;
  std::string mode = "sampled";
  std::size_t threads = 1;
};

void add_pair_options(CLI::App* cmd, PairArgs& a) {
  cmd->add_option("--query", a.query, "Query representation directory")->required()->check(CLI::ExistingDirectory);
  cmd->add_option("--gallery", a.gallery, "Gallery representation directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  cmd->add_option("--mode", a.mode, "Distance mode")->check(CLI::IsMember({"exact", "sampled"}))->capture_default_str();
  cmd->add_option("--threads", a.threads, "Distance workers (default: STP_THREADS or 1)")
      ->check(kPositive)
      ->capture_default_str();
}

int run_dist(const PairArgs& a, const std::string& out) {
  const auto q = stp::io::load_representation_set(a.query);
  const auto g = stp::io::load_representation_set(a.gallery);
  const auto d = stp::distance_matrix(q.reps, g.reps, parse_mode(a.mode), a.threads);
  stp::io::save_distance_matrix(out, d, q.tracklet_ids, g.tracklet_ids);
  std::cout << "distances " << d.rows() << " x " << d.cols() << " -> " << out << '\n';
  return 0;
}

int run_rank(const PairArgs& a, bool exclude_camera, std::size_t top) {
  const auto q = stp::io::load_representation_set(a.query);
  const auto g = stp::io::load_representation_set(a.gallery);
  const auto d = stp::distance_matrix(q.reps, g.reps, parse_mode(a.mode), a.threads);
  for (std::size_t i = 0; i < q.reps.size(); ++i) {
    const auto r = stp::rank_by_distances(q.labels.ids[i], q.labels.camera(i),
                                          d.row(static_cast<Eigen::Index>(i)).transpose(), g.labels, exclude_camera);
    print_rank_list(r, g.tracklet_ids, top);
  }
  return 0;
}

struct EvalArgs {
  PairArgs pair;
  std::string manifest;
  std::string pooling = "symbolic";
  std::string bins = "sqrt";
  long t_samples = 64;
  std::string protocol = "multi-shot";
  std::vector<std::size_t> ranks{1, 5, 10, 20};
  std::optional<bool> map;
  std::string report;
  bool rank_lists = false;
};

int run_eval(EvalArgs a) {
  auto protocol = protocol_named(a.protocol);
  if (a.map) protocol.compute_map = *a.map;
  stp::EvalReport report;
  std::string method;
  if (!a.manifest.empty()) {
    const fs::path manifest_path = a.manifest;
    const auto manifest = stp::io::load_manifest(manifest_path);
    std::size_t gallery_size = 0;
    for (const auto& e : manifest.entries) gallery_size += e.split == stp::io::Split::Gallery ? 1 : 0;
    protocol.cmc_ranks = usable_ranks(a.ranks, gallery_size);
    stp::pipeline::RunConfig cfg;
    cfg.pooling = stp::pipeline::parse_pooling(a.pooling);
    cfg.pooling_config = pooling_config(a.bins, a.t_samples);
    cfg.mode = parse_mode(a.pair.mode);
    cfg.protocol = protocol;
    cfg.workers = a.pair.threads;
    report = stp::pipeline::evaluate_manifest(manifest_path, cfg);
    method = a.pooling == "symbolic" ? "symbolic/" + a.pair.mode : a.pooling + "/euclidean";
  } else {
    if (a.pair.query.empty() || a.pair.gallery.empty()) {
      throw CLI::ValidationError("eval", "give --manifest, or both --query and --gallery");
    }
    const auto q = stp::io::load_representation_set(a.pair.query);
    const auto g = stp::io::load_representation_set(a.pair.gallery);
    protocol.cmc_ranks = usable_ranks(a.ranks, g.reps.size());
    report = stp::evaluate(q.reps, q.labels, g.reps, g.labels, protocol, parse_mode(a.pair.mode), a.pair.threads);
    method = "symbolic/" + a.pair.mode;
    if (a.rank_lists) {
      for (const auto& r : report.per_query) print_rank_list(r, g.tracklet_ids, 0);
    }
  }

  std::cout << "protocol " << a.protocol << "  method " << method << "  queries " << report.per_query.size()
            << '\n';
  for (const auto& [k, v] : report.cmc) std::cout << "rank-" << k << '\t' << std::fixed << std::setprecision(4) << v << '\n';
  if (report.map) std::cout << "mAP\t" << std::fixed << std::setprecision(4) << *report.map << '\n';
  if (report.queries_without_match > 0) {
    std::cerr << "note: " << report.queries_without_match << " queries had no relevant gallery item\n";
  }
  if (!a.report.empty()) {
    std::ofstream out(a.report);
    out << report_json(report, a.protocol, method).dump(2) << '\n';
    if (!out) throw stp::Error(stp::ErrorCode::IoFailure, "cannot write report '" + a.report + "'");
  }
  return 0;
}

struct LossArgs {
  std::string reps;
  std::string labels;
  double margin = stp::kDefaultMargin;
  std::string mine = "batch-hard";
  std::string mode = "sampled";
};

int run_loss(const LossArgs& a) {
  const auto set = stp::io::load_representation_set(a.reps, a.labels.empty() ? fs::path{} : fs::path(a.labels));
  const auto mined = stp::batch_hard_mine(set.reps, set.labels.ids, a.margin, parse_mode(a.mode));
  double sum = 0.0;
  std::cout << "anchor\tpositive\tnegative\tloss\n";
  for (const auto& t : mined) {
    std::cout << set.tracklet_ids[t.anchor] << '\t' << set.tracklet_ids[t.positive] << '\t'
              << set.tracklet_ids[t.negative] << '\t' << std::setprecision(10) << t.loss << '\n';
    sum += t.loss;
  }
  std::cout << "mean\t" << std::setprecision(10) << sum / static_cast<double>(mined.size()) << '\n';
  return 0;
}

struct SynthArgs {
  stp::synth::Config cfg;
  std::string scheme = "variance-sep";
  std::string out;
  std::string format = "bin";
};

int run_synth(SynthArgs a) {
  a.cfg.scheme = stp::synth::parse_scheme(a.scheme);
  const auto manifest = stp::synth::write_dataset(
      a.cfg, a.out, a.format == "csv" ? stp::synth::FileFormat::Csv : stp::synth::FileFormat::Binary);
  std::cout << "tracklets " << a.cfg.classes * a.cfg.tracklets_per_class << "\nmanifest " << manifest.string()
            << '\n';
  return 0;
}

struct BenchArgs {
  long q = 1000;
  long g = 1000;
  long m = 128;
  long t = 64;
  std::size_t threads = 1;
  std::uint64_t seed = 1;
};

std::vector<stp::SymbolicRepresentation<double>> bench_reps(std::mt19937_64& rng, long count, long m, long t) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<stp::SymbolicRepresentation<double>> out;
  out.reserve(static_cast<std::size_t>(count));
  for (long i = 0; i < count; ++i) {
    stp::FrameFeatureMatrix<double> f(16, m);
    for (auto& v : f.reshaped()) v = normal(rng);
    out.push_back(stp::pool_features(f, stp::PoolingConfig::sqrt(t)));
  }
  return out;
}

int run_bench(const BenchArgs& a) {
  std::mt19937_64 rng(a.seed);
  const auto q = bench_reps(rng, a.q, a.m, a.t);
  const auto g = bench_reps(rng, a.g, a.m, a.t);
  using clock = std::chrono::steady_clock;
  const auto time = [&](std::size_t workers, stp::DistanceMatrix<double>& out) {
    const auto t0 = clock::now();
    out = stp::distance_matrix(q, g, stp::DistanceMode::Sampled, workers);
    return std::chrono::duration<double>(clock::now() - t0).count();
  };
  stp::DistanceMatrix<double> serial;
  stp::DistanceMatrix<double> parallel;
  const double ts = time(1, serial);
  const double tp = time(a.threads, parallel);
  const bool equal = serial.size() == parallel.size() &&
                     std::memcmp(serial.data(), parallel.data(), sizeof(double) * serial.size()) == 0;
  const double pairs = static_cast<double>(a.q) * static_cast<double>(a.g);
  std::cout << std::fixed << std::setprecision(3) << "pairs " << static_cast<long long>(pairs) << "  M " << a.m
            << "  T " << a.t << "  hardware_threads " << std::thread::hardware_concurrency() << '\n'
            << "serial\t" << ts << " s\t" << std::setprecision(0) << pairs / ts << " pairs/s\n"
            << std::setprecision(3) << "threads=" << a.threads << '\t' << tp << " s\t" << std::setprecision(0)
            << pairs / tp << " pairs/s\n"
            << std::setprecision(2) << "speedup\t" << ts / tp << "\nbit_equal\t" << (equal ? "yes" : "no") << '\n';
  if (!equal) {
    std::cerr << "error: parallel output differs from serial output\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Symbolic temporal pooling for tracklet retrieval"};
  app.require_subcommand(1);
  const std::size_t threads = default_threads();

  PoolArgs pool;
  auto* pool_cmd = app.add_subcommand("pool", "Pool manifest tracklets into representation sets");
  pool_cmd->add_option("--manifest", pool.manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  pool_cmd->add_option("--bins", pool.bins, "Bin policy: sqrt or a fixed count")->capture_default_str();
  pool_cmd->add_option("--t-samples", pool.t_samples, "Quantile samples per feature")
      ->check(kPositive)
      ->capture_default_str();
  pool_cmd->add_option("--out", pool.out, "Output directory (one subdirectory per split)")->required();

  PairArgs dist;
  dist.threads = threads;
  std::string dist_out;
  auto* dist_cmd = app.add_subcommand("dist", "Write the query x gallery distance matrix");
  add_pair_options(dist_cmd, dist);
  dist_cmd->add_option("--out", dist_out, "Distance matrix file")->required();

  PairArgs rank;
  rank.threads = threads;
  bool rank_exclude = false;
  std::size_t rank_top = 0;
  auto* rank_cmd = app.add_subcommand("rank", "Print the ranked gallery for every query");
  add_pair_options(rank_cmd, rank);
  rank_cmd->add_flag("--exclude-same-camera", rank_exclude, "Drop gallery items from the query's camera");
  rank_cmd->add_option("--top", rank_top, "Entries per query (0 = all)")->capture_default_str();

  EvalArgs eval;
  eval.pair.threads = threads;
  auto* eval_cmd = app.add_subcommand("eval", "Score retrieval with CMC and mAP");
  eval_cmd->add_option("--query", eval.pair.query, "Query representation directory")->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--gallery", eval.pair.gallery, "Gallery representation directory")
      ->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--manifest", eval.manifest, "Evaluate straight from a dataset manifest")
      ->check(CLI::ExistingFile)
      ->excludes("--query")
      ->excludes("--gallery");
  eval_cmd->add_option("--pooling", eval.pooling, "Pooling with --manifest")
      ->check(CLI::IsMember({"symbolic", "avg", "max"}))
      ->capture_default_str();
  eval_cmd->add_option("--bins", eval.bins, "Bin policy with --manifest")->capture_default_str();
  eval_cmd->add_option("--t-samples", eval.t_samples, "Quantile samples with --manifest")
      ->check(kPositive)
      ->capture_default_str();
  eval_cmd->add_option("--mode", eval.pair.mode, "Distance mode")
      ->check(CLI::IsMember({"exact", "sampled"}))
      ->capture_default_str();
  eval_cmd->add_option("--threads", eval.pair.threads, "Distance workers")->check(kPositive);
  eval_cmd->add_option("--protocol", eval.protocol, "Evaluation protocol")
      ->check(CLI::IsMember({"single-shot", "multi-shot", "cross-camera"}))
      ->capture_default_str();
  eval_cmd->add_option("--cmc-ranks", eval.ranks, "CMC ranks")->delimiter(',')->check(kPositive);
  eval_cmd->add_flag("--map,!--no-map", eval.map, "Force mAP on or off (default: by protocol)");
  eval_cmd->add_option("--report", eval.report, "Write the report as JSON");
  eval_cmd->add_flag("--rank-lists", eval.rank_lists, "Print every query's ranked gallery");

  LossArgs loss;
  auto* loss_cmd = app.add_subcommand("loss", "Batch-hard symbolic triplet loss over a representation set");
  loss_cmd->add_option("--reps", loss.reps, "Representation directory")->required()->check(CLI::ExistingDirectory);
  loss_cmd->add_option("--labels", loss.labels, "Labels file (default: <reps>/labels.tsv)")
      ->check(CLI::ExistingFile);
  loss_cmd->add_option("--margin", loss.margin, "Triplet margin")->check(CLI::NonNegativeNumber)->capture_default_str();
  loss_cmd->add_option("--mine", loss.mine, "Mining strategy")->check(CLI::IsMember({"batch-hard"}))->capture_default_str();
  loss_cmd->add_option("--mode", loss.mode, "Distance mode")
      ->check(CLI::IsMember({"exact", "sampled"}))
      ->capture_default_str();

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write a seeded synthetic dataset");
  synth_cmd->add_option("--classes", synth.cfg.classes, "Identities")->capture_default_str();
  synth_cmd->add_option("--tracklets-per-class", synth.cfg.tracklets_per_class, "Tracklets per identity")
      ->capture_default_str();
  synth_cmd->add_option("--frames", synth.cfg.frames, "Frames per tracklet")->capture_default_str();
  synth_cmd->add_option("--features", synth.cfg.features, "Features per frame")->capture_default_str();
  synth_cmd->add_option("--scheme", synth.scheme, "Class separation scheme")
      ->check(CLI::IsMember({"mean-sep", "variance-sep"}))
      ->capture_default_str();
  synth_cmd->add_option("--noise", synth.cfg.noise, "Per-tracklet parameter jitter")->capture_default_str();
  synth_cmd->add_option("--seed", synth.cfg.seed, "Random seed")->capture_default_str();
  synth_cmd->add_option("--format", synth.format, "Feature file format")
      ->check(CLI::IsMember({"bin", "csv"}))
      ->capture_default_str();
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();

  BenchArgs bench;
  bench.threads = threads;
  auto* bench_cmd = app.add_subcommand("bench", "Time the sampled distance kernel");
  bench_cmd->add_option("--q", bench.q, "Queries")->check(kPositive)->capture_default_str();
  bench_cmd->add_option("--g", bench.g, "Gallery size")->check(kPositive)->capture_default_str();
  bench_cmd->add_option("--m", bench.m, "Features")->check(kPositive)->capture_default_str();
  bench_cmd->add_option("--t", bench.t, "Quantile samples")->check(kPositive)->capture_default_str();
  bench_cmd->add_option("--threads", bench.threads, "Parallel workers")->check(kPositive);
  bench_cmd->add_option("--seed", bench.seed, "Random seed")->capture_default_str();

  try {
    app.parse(argc, argv);
    if (*pool_cmd) return run_pool(pool);
    if (*dist_cmd) return run_dist(dist, dist_out);
    if (*rank_cmd) return run_rank(rank, rank_exclude, rank_top);
    if (*eval_cmd) return run_eval(eval);
    if (*loss_cmd) return run_loss(loss);
    if (*synth_cmd) return run_synth(synth);
    if (*bench_cmd) return run_bench(bench);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const stp::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
