#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cxai/boosting.hpp"
#include "cxai/dataset.hpp"
#include "cxai/evaluation.hpp"
#include "cxai/explain.hpp"
#include "cxai/forest.hpp"
#include "cxai/logistic.hpp"
#include "cxai/model_io.hpp"
#include "cxai/random_search.hpp"
#include "cxai/selection.hpp"
#include "cxai/svg.hpp"
#include "cxai/synth.hpp"

// The staged run behind the command line tool: split, select, train, predict,
// explain and report, all reading and writing one output directory.
//
//   <out>/config.resolved.json   every setting, defaults filled in
//   <out>/manifest.json          artifact checksums, frozen fit artifacts
//   <out>/run_log.jsonl          timestamps and timings (not deterministic)
//   <out>/splits/                partitions, split.json, preprocess.json
//   <out>/selection/             selection_report.json, features.txt
//   <out>/models/                <name>.json, <name>.search.json
//   <out>/reports/               <name>.metrics.json
//   <out>/explain/               json + svg per request
//   <out>/report/                table1.csv, dotplot.json, rejections.json

namespace cxai {

namespace fs = std::filesystem;

inline constexpr int kPipelineSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Checksums

inline std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline std::string file_checksum(const fs::path& p) { return fnv1a_hex(read_file(p)); }

// ---------------------------------------------------------------------------
// Configuration

struct ExplainSettings {
  int pfi_repeats = 10;
  int grid_quantiles = 21;
  std::size_t background = 1000;  // rows sampled from train for PDP and Break Down
  std::string split = "test";
};

struct ModelSettings {
  std::vector<std::string> families{"logistic", "woe_logistic", "rf", "gbm", "xgb"};
  std::vector<std::string> search{"rf", "xgb"};
  std::size_t search_budget = 8;
  double validation_fraction = 0.25;
  std::map<std::string, HyperParamSpace> spaces;
  LogisticOptions logistic;
  WoeOptions woe;
  ForestParams rf;
  BoostParams gbm;
  BoostParams xgb;

  ModelSettings() {
    rf.n_trees = 100;
    xgb.learning_rate = 0.1;
    xgb.max_depth = 4;
    spaces["rf"] = {{"n_trees", {50, 150, true, false}},
                    {"mtry", {2, 6, true, false}},
                    {"min_leaf", {1, 1, true, false}},
                    {"max_depth", {0, 0, true, false}}};
    spaces["xgb"] = {{"n_trees", {50, 250, true, false}},
                     {"max_depth", {2, 5, true, false}},
                     {"learning_rate", {0.03, 0.3, false, true}},
                     {"lambda", {0.1, 10, false, true}},
                     {"gamma", {0, 1, false, false}},
                     {"subsample", {0.6, 1, false, false}},
                     {"colsample", {0.5, 1, false, false}},
                     {"min_child_weight", {1, 10, false, false}}};
  }
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::string data_path;
  Schema schema;
  std::vector<std::string> dummy_columns;
  SplitParams split;
  bool selection_enabled = true;
  SelectionParams selection;
  ModelSettings models;
  double min_gini = 0.6;
  std::set<std::string> expert_rejected;
  ExplainSettings explain;

  RunConfig() {
    schema.date = "obs_date";
    selection.boosting.max_depth = 3;
  }
};

inline const std::vector<std::string>& known_families() {
  static const std::vector<std::string> f{"logistic", "woe_logistic", "rf", "gbm", "xgb"};
  return f;
}

namespace detail {

inline nlohmann::json without_seed(nlohmann::json j) {
  j.erase("seed");
  return j;
}

inline nlohmann::json forest_json(const ForestParams& p) {
  nlohmann::json j = p;
  j.erase("seed");
  return j;
}

template <typename T>
T merged(const T& defaults, const nlohmann::json& user) {
  nlohmann::json j = defaults;
  j.merge_patch(user);
  if (j.contains("seed")) j["seed"] = 0;
  return j.get<T>();
}

inline nlohmann::json logistic_json(const LogisticOptions& o) {
  return {{"tol", o.tol}, {"max_iter", o.max_iter}, {"ridge", o.ridge}};
}

inline nlohmann::json woe_json(const WoeOptions& o) {
  return {{"max_bins", o.binning.max_bins},
          {"min_bin_frac", o.binning.min_bin_frac},
          {"monotone", o.binning.monotone},
          {"smoothing", o.smoothing}};
}

inline Date config_date(const nlohmann::json& j, const char* key) {
  const auto s = j.at(key).get<std::string>();
  auto d = Date::parse(s);
  if (!d) throw Error(ErrorCode::BadConfig, std::string(key) + ": bad date '" + s + "'");
  return *d;
}

/// Every key of `user` must exist in `defaults`; `open` lists paths whose
/// children are free-form.
inline void check_keys(const nlohmann::json& user, const nlohmann::json& defaults, const std::string& path,
                       const std::set<std::string>& open) {
  if (!user.is_object()) return;
  if (!defaults.is_object()) throw Error(ErrorCode::BadConfig, path + " must not be an object");
  for (const auto& [k, v] : user.items()) {
    const auto child = path.empty() ? k : path + "." + k;
    if (!defaults.contains(k)) throw Error(ErrorCode::BadConfig, "unknown config key '" + child + "'");
    if (!open.contains(child)) check_keys(v, defaults.at(k), child, open);
  }
}

}  // namespace detail

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json spaces = nlohmann::json::object();
  for (const auto& [fam, space] : c.models.spaces) spaces[fam] = space;
  nlohmann::json schema = c.schema;
  return nlohmann::json{
      {"schema_version", kPipelineSchemaVersion},
      {"seed", c.seed},
      {"data", {{"path", c.data_path}, {"schema", schema}, {"dummy_columns", c.dummy_columns}}},
      {"split",
       {{"test_fraction", c.split.test_fraction},
        {"oos_fraction", c.split.oos_fraction},
        {"oot_start", c.split.oot_start.str()},
        {"oot_end", c.split.oot_end.str()}}},
      {"selection",
       {{"enabled", c.selection_enabled},
        {"unique_threshold", c.selection.unique_threshold},
        {"top_k", c.selection.top_k},
        {"min_ks", c.selection.min_ks},
        {"boosting", detail::without_seed(c.selection.boosting)}}},
      {"models",
       {{"families", c.models.families},
        {"search", c.models.search},
        {"search_budget", c.models.search_budget},
        {"validation_fraction", c.models.validation_fraction},
        {"spaces", spaces},
        {"logistic", detail::logistic_json(c.models.logistic)},
        {"woe_logistic", detail::woe_json(c.models.woe)},
        {"rf", detail::forest_json(c.models.rf)},
        {"gbm", detail::without_seed(c.models.gbm)},
        {"xgb", detail::without_seed(c.models.xgb)}}},
      {"rejection", {{"min_gini", c.min_gini}, {"expert_rejected", c.expert_rejected}}},
      {"explain",
       {{"pfi_repeats", c.explain.pfi_repeats},
        {"grid_quantiles", c.explain.grid_quantiles},
        {"background", c.explain.background},
        {"split", c.explain.split}}}};
}

/// Reads a config, filling unspecified settings from the defaults. Unknown
/// keys and invalid values are BadConfig.
inline RunConfig config_from_json(const nlohmann::json& user) {
  if (!user.is_object()) throw Error(ErrorCode::BadConfig, "config must be a JSON object");
  const RunConfig defaults;
  const nlohmann::json base = to_json(defaults);
  detail::check_keys(user, base, "", {"data.schema", "models.spaces"});
  if (user.contains("schema_version") && user.at("schema_version") != kPipelineSchemaVersion) {
    throw Error(ErrorCode::BadConfig, "unsupported config schema_version");
  }
  nlohmann::json j = base;
  // Spaces replace rather than merge, so a user space can drop parameters.
  nlohmann::json patch = user;
  if (patch.contains("models") && patch["models"].contains("spaces")) {
    for (auto& [fam, space] : patch["models"]["spaces"].items()) j["models"]["spaces"][fam] = nlohmann::json::object();
  }
  j.merge_patch(patch);

  RunConfig c;
  try {
    c.seed = j.at("seed").get<std::uint64_t>();
    const auto& d = j.at("data");
    c.data_path = d.at("path").get<std::string>();
    c.schema = d.at("schema").get<Schema>();
    c.dummy_columns = d.at("dummy_columns").get<std::vector<std::string>>();
    const auto& s = j.at("split");
    c.split.test_fraction = s.at("test_fraction").get<double>();
    c.split.oos_fraction = s.at("oos_fraction").get<double>();
    c.split.oot_start = detail::config_date(s, "oot_start");
    c.split.oot_end = detail::config_date(s, "oot_end");
    c.split.seed = c.seed;
    const auto& sel = j.at("selection");
    c.selection_enabled = sel.at("enabled").get<bool>();
    c.selection.unique_threshold = sel.at("unique_threshold").get<std::size_t>();
    c.selection.top_k = sel.at("top_k").get<std::size_t>();
    c.selection.min_ks = sel.at("min_ks").get<double>();
    c.selection.boosting = detail::merged(defaults.selection.boosting, sel.at("boosting"));
    const auto& m = j.at("models");
    c.models.families = m.at("families").get<std::vector<std::string>>();
    c.models.search = m.at("search").get<std::vector<std::string>>();
    c.models.search_budget = m.at("search_budget").get<std::size_t>();
    c.models.validation_fraction = m.at("validation_fraction").get<double>();
    c.models.spaces.clear();
    for (const auto& [fam, space] : m.at("spaces").items()) c.models.spaces[fam] = space.get<HyperParamSpace>();
    const auto& lo = m.at("logistic");
    c.models.logistic.tol = lo.at("tol").get<double>();
    c.models.logistic.max_iter = lo.at("max_iter").get<int>();
    c.models.logistic.ridge = lo.at("ridge").get<double>();
    const auto& wo = m.at("woe_logistic");
    c.models.woe.binning.max_bins = wo.at("max_bins").get<int>();
    c.models.woe.binning.min_bin_frac = wo.at("min_bin_frac").get<double>();
    c.models.woe.binning.monotone = wo.at("monotone").get<bool>();
    c.models.woe.smoothing = wo.at("smoothing").get<double>();
    c.models.rf = detail::merged(defaults.models.rf, m.at("rf"));
    c.models.gbm = detail::merged(defaults.models.gbm, m.at("gbm"));
    c.models.xgb = detail::merged(defaults.models.xgb, m.at("xgb"));
    const auto& rej = j.at("rejection");
    c.min_gini = rej.at("min_gini").get<double>();
    c.expert_rejected = rej.at("expert_rejected").get<std::set<std::string>>();
    const auto& ex = j.at("explain");
    c.explain.pfi_repeats = ex.at("pfi_repeats").get<int>();
    c.explain.grid_quantiles = ex.at("grid_quantiles").get<int>();
    c.explain.background = ex.at("background").get<std::size_t>();
    c.explain.split = ex.at("split").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadConfig, std::string("config: ") + e.what());
  }

  const std::set<std::string> fams(known_families().begin(), known_families().end());
  for (const auto& f : c.models.families) {
    if (!fams.contains(f)) throw Error(ErrorCode::BadConfig, "unknown model family '" + f + "'");
  }
  for (const auto& f : c.models.search) {
    if (f != "rf" && f != "gbm" && f != "xgb") {
      throw Error(ErrorCode::BadConfig, "random search is only defined for rf, gbm and xgb, not '" + f + "'");
    }
    if (!c.models.spaces.contains(f)) throw Error(ErrorCode::BadConfig, "no search space for '" + f + "'");
  }
  if (c.models.validation_fraction <= 0 || c.models.validation_fraction >= 1) {
    throw Error(ErrorCode::BadConfig, "validation_fraction must lie in (0,1)");
  }
  if (c.min_gini < 0 || c.min_gini > 1) throw Error(ErrorCode::BadConfig, "min_gini must lie in [0,1]");
  if (c.selection.min_ks < 0 || c.selection.min_ks > 1) throw Error(ErrorCode::BadConfig, "min_ks must lie in [0,1]");
  if (c.selection.top_k < 1 || c.selection.unique_threshold < 1) {
    throw Error(ErrorCode::BadConfig, "top_k and unique_threshold must be at least 1");
  }
  if (c.explain.pfi_repeats < 1 || c.explain.grid_quantiles < 1 || c.explain.background < 1) {
    throw Error(ErrorCode::BadConfig, "explain settings must be positive");
  }
  const auto& names = kSplitNames;
  if (std::find(names.begin(), names.end(), c.explain.split) == names.end()) {
    throw Error(ErrorCode::BadConfig, "unknown split '" + c.explain.split + "'");
  }
  return c;
}

/// Loads a config file. A relative data path is taken relative to the file.
inline RunConfig load_config(const fs::path& path) {
  auto c = config_from_json(read_json(path.string()));
  if (!c.data_path.empty() && fs::path(c.data_path).is_relative()) {
    c.data_path = (path.parent_path() / c.data_path).lexically_normal().string();
  }
  return c;
}

// ---------------------------------------------------------------------------
// Run directory

/// Artifact checksums keyed by path relative to the output directory.
/// `frozen` holds fit artifacts that held-out data may only be read through.
struct RunManifest {
  std::string run_id;
  std::string split_key;  // checksum of the data and split settings the splits came from
  std::map<std::string, std::string> artifacts;  // path -> checksum or "volatile"
  std::map<std::string, std::string> frozen;
  std::map<std::string, std::string> inputs;  // input file -> checksum
  std::map<std::string, std::uint64_t> seeds;
};

inline nlohmann::json to_json(const RunManifest& m) {
  return nlohmann::json{{"schema_version", kPipelineSchemaVersion},
                        {"run_id", m.run_id},
                        {"split_key", m.split_key},
                        {"artifacts", m.artifacts},
                        {"frozen", m.frozen},
                        {"inputs", m.inputs},
                        {"seeds", m.seeds}};
}

inline RunManifest manifest_from_json(const nlohmann::json& j) {
  RunManifest m;
  m.run_id = j.at("run_id").get<std::string>();
  m.split_key = j.at("split_key").get<std::string>();
  m.artifacts = j.at("artifacts").get<std::map<std::string, std::string>>();
  m.frozen = j.at("frozen").get<std::map<std::string, std::string>>();
  m.inputs = j.value("inputs", std::map<std::string, std::string>{});
  m.seeds = j.value("seeds", std::map<std::string, std::uint64_t>{});
  return m;
}

struct RunContext {
  RunConfig config;
  fs::path out = "run";
  int threads = 1;
  bool verbose = false;
};

namespace detail {

// Streams derived from the master seed; the split uses the seed itself.
inline constexpr std::uint64_t kSelectionStream = 101;
inline constexpr std::uint64_t kValidationStream = 300;
inline constexpr std::uint64_t kPfiStream = 400;
inline constexpr std::uint64_t kBackgroundStream = 401;

inline std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string split_key(const RunConfig& c) {
  const auto j = to_json(c);
  return fnv1a_hex(nlohmann::json{{"seed", j["seed"]}, {"data", j["data"]}, {"split", j["split"]}}.dump());
}

inline std::string sanitize(const std::string& s) {
  std::string out;
  for (char ch : s) {
    const bool ok = std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == '.' || ch == '+';
    out += ok ? ch : '_';
  }
  return out;
}

}  // namespace detail

/// One command's view of the output directory. Every artifact goes through
/// write(), which records its checksum; save() persists the manifest.
class RunDir {
 public:
  RunDir(const RunContext& ctx, std::string command) : ctx_(ctx), command_(std::move(command)) {
    fs::create_directories(ctx.out);
    const auto mp = ctx.out / "manifest.json";
    if (fs::exists(mp)) manifest_ = manifest_from_json(read_json(mp.string()));
    const auto resolved = to_json(ctx.config);
    manifest_.run_id = fnv1a_hex(resolved.dump());
    write_json_artifact("config.resolved.json", resolved);
  }

  const RunContext& ctx() const { return ctx_; }
  fs::path path(const std::string& rel) const { return ctx_.out / rel; }
  RunManifest& manifest() { return manifest_; }
  const RunManifest& manifest() const { return manifest_; }

  void write(const std::string& rel, const std::string& content, bool is_volatile = false) {
    const auto p = path(rel);
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + p.string());
    out << content;
    if (!out) throw Error(ErrorCode::Io, "write failed: " + p.string());
    manifest_.artifacts[rel] = is_volatile ? "volatile" : fnv1a_hex(content);
  }

  void write_json_artifact(const std::string& rel, const nlohmann::json& j) { write(rel, j.dump(2) + "\n"); }

  void freeze(const std::string& rel) { manifest_.frozen[rel] = manifest_.artifacts.at(rel); }

  /// Throws LeakageGuard unless `rel` was frozen and is unchanged on disk.
  void require_frozen(const std::string& rel) const {
    auto it = manifest_.frozen.find(rel);
    if (it == manifest_.frozen.end()) {
      throw Error(ErrorCode::LeakageGuard, rel + " is not a frozen fit artifact; run split first");
    }
    const auto p = path(rel);
    if (!fs::exists(p) || file_checksum(p) != it->second) {
      throw Error(ErrorCode::LeakageGuard, rel + " changed after it was frozen");
    }
  }

  /// Throws LeakageGuard if a recorded artifact differs from its checksum.
  void require_unchanged(const std::string& rel) const {
    auto it = manifest_.artifacts.find(rel);
    if (it == manifest_.artifacts.end()) throw Error(ErrorCode::Io, rel + " missing; run split first");
    const auto p = path(rel);
    if (!fs::exists(p)) throw Error(ErrorCode::Io, rel + " missing; run split first");
    if (file_checksum(p) != it->second) throw Error(ErrorCode::LeakageGuard, rel + " changed after the split");
  }

  void log(nlohmann::json event) const {
    event["ts"] = detail::utc_now();
    event["command"] = command_;
    event["threads"] = ctx_.threads;
    std::ofstream out(path("run_log.jsonl"), std::ios::app | std::ios::binary);
    out << event.dump() << '\n';
    if (ctx_.verbose) std::fprintf(stderr, "%s\n", event.dump().c_str());
  }

  void save() {
    const auto p = path("manifest.json");
    write_json(p.string(), to_json(manifest_));
  }

 private:
  const RunContext& ctx_;
  std::string command_;
  RunManifest manifest_;
};

// ---------------------------------------------------------------------------
// Partitions

/// One partition after the frozen preprocessing.
struct Part {
  std::string name;
  Dataset data;
  Matrix X;  // every prepared feature
  std::vector<int> y;
};

inline Schema split_schema(const RunConfig& c) {
  Schema s = c.schema;
  if (s.date.empty()) s.date = "obs_date";
  return s;
}

/// Reads a partition written by split and applies the frozen preprocessor.
inline Part load_part(const RunDir& dir, const std::string& name) {
  const auto& names = kSplitNames;
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    throw Error(ErrorCode::InvalidArgument, "unknown split '" + name + "'");
  }
  const auto& m = dir.manifest();
  if (m.split_key != detail::split_key(dir.ctx().config)) {
    throw Error(ErrorCode::BadConfig, "splits were made with different data or split settings; rerun split");
  }
  dir.require_frozen("splits/preprocess.json");
  const std::string rel = "splits/" + name + ".csv";
  dir.require_unchanged(rel);
  const auto pre = Preprocessor::from_json(read_json(dir.path("splits/preprocess.json").string()).at("preprocessor"));
  Part p;
  p.name = name;
  p.data = pre.apply(load_csv(dir.path(rel).string(), split_schema(dir.ctx().config)));
  p.X = p.data.to_matrix();
  p.y = p.data.target;
  return p;
}

// ---------------------------------------------------------------------------
// synth

inline fs::path cmd_synth(const RunContext& ctx, SynthParams p) {
  RunDir dir(ctx, "synth");
  const auto d = make_synthetic(p);
  std::ostringstream csv_text;
  write_csv(csv_text, d);
  dir.write("synthetic.csv", csv_text.str());
  nlohmann::json meta = p;
  dir.write_json_artifact("synthetic.json", {{"schema_version", kPipelineSchemaVersion},
                                             {"params", meta},
                                             {"informative", synth_informative_names(p)},
                                             {"n_bad", d.count_bad()}});
  dir.log({{"event", "synthesized"}, {"rows", p.n_rows}});
  dir.save();
  return dir.path("synthetic.csv");
}

// ---------------------------------------------------------------------------
// split

struct SplitSummary {
  std::map<std::string, std::size_t> rows, bad;
  std::size_t excluded = 0;
};

/// Temporal split of the configured data, then the preprocessor is fitted on
/// train alone and frozen before anything else reads held-out rows.
inline SplitSummary cmd_split(const RunContext& ctx) {
  const auto& c = ctx.config;
  if (c.data_path.empty()) throw Error(ErrorCode::BadConfig, "no data path configured");
  RunDir dir(ctx, "split");
  const auto data = load_csv(c.data_path, split_schema(c));
  SplitIndices idx;
  const auto parts = temporal_split(data, c.split, &idx);
  Preprocessor pre;
  pre.fit(parts.train, c.dummy_columns);

  // The partitions are raw; preprocessing is replayed on read.
  SplitSummary s;
  s.excluded = idx.excluded.size();
  const std::pair<const char*, const Dataset*> named[] = {{"train", &parts.train},
                                                          {"test", &parts.test},
                                                          {"out_of_sample", &parts.out_of_sample},
                                                          {"out_of_time", &parts.out_of_time}};
  for (const auto& [name, d] : named) {
    std::ostringstream text;
    write_csv(text, *d, c.schema.missing_token);
    dir.write(std::string("splits/") + name + ".csv", text.str());
    s.rows[name] = d->n_rows();
    s.bad[name] = d->count_bad();
  }
  dir.write_json_artifact("splits/preprocess.json", {{"schema_version", kPipelineSchemaVersion},
                                                     {"fitted_on", "train"},
                                                     {"preprocessor", pre.to_json()}});
  dir.freeze("splits/preprocess.json");
  auto& m = dir.manifest();
  m.split_key = detail::split_key(c);
  m.inputs["data"] = file_checksum(c.data_path);
  m.seeds["master"] = c.seed;
  m.seeds["split"] = c.split.seed;
  // A new split invalidates everything downstream of the old one.
  for (auto it = m.artifacts.begin(); it != m.artifacts.end();) {
    const bool keep = it->first.starts_with("splits/") || it->first == "config.resolved.json" ||
                      it->first.starts_with("synthetic.");
    it = keep ? std::next(it) : m.artifacts.erase(it);
  }
  dir.write_json_artifact("splits/split.json", {{"schema_version", kPipelineSchemaVersion},
                                                {"source_checksum", file_checksum(c.data_path)},
                                                {"rows", s.rows},
                                                {"bad", s.bad},
                                                {"excluded_after_oot_end", s.excluded}});
  dir.log({{"event", "split"}, {"rows", s.rows}, {"excluded", s.excluded}});
  dir.save();
  return s;
}

// ---------------------------------------------------------------------------
// select

inline SelectionReport cmd_select(const RunContext& ctx) {
  RunDir dir(ctx, "select");
  const auto train = load_part(dir, "train");
  auto params = ctx.config.selection;
  params.boosting.seed = derive_seed(ctx.config.seed, detail::kSelectionStream);
  params.threads = ctx.threads;
  const auto t0 = std::chrono::steady_clock::now();
  dir.manifest().seeds["selection"] = params.boosting.seed;
  auto report = select_features(train.X, train.y, params);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  dir.write_json_artifact("selection/selection_report.json", to_json(report));
  std::string list;
  for (const auto& f : report.survivors()) list += f + "\n";
  dir.write("selection/features.txt", list);
  dir.log({{"event", "selected"}, {"n_in", report.input.size()}, {"n_out", report.survivors().size()},
           {"seconds", seconds}});
  dir.save();
  return report;
}

// ---------------------------------------------------------------------------
// train

namespace detail {

inline std::uint64_t family_stream(const std::string& family) {
  const auto& f = known_families();
  return 200 + static_cast<std::uint64_t>(std::find(f.begin(), f.end(), family) - f.begin());
}

/// Copies `base`, overwriting the keys named in `overrides`. Integer fields
/// take the rounded value.
template <typename P>
P with_overrides(const P& base, const TrainConfig& overrides) {
  nlohmann::json j = base;
  for (const auto& [k, v] : overrides) {
    if (!j.contains(k) || k == "seed") throw Error(ErrorCode::BadConfig, "unknown hyperparameter '" + k + "'");
    if (j[k].is_boolean()) {
      j[k] = v != 0;
    } else if (j[k].is_number_integer() || j[k].is_number_unsigned()) {
      j[k] = std::llround(v);
    } else {
      j[k] = v;
    }
  }
  return j.get<P>();
}

}  // namespace detail

/// Table-style model name: reg_log_63, reg_log_63_woe, gbm_63, rf_63_RS.
inline std::string model_name(const std::string& family, std::size_t n_features, bool searched) {
  const auto n = std::to_string(n_features);
  std::string name;
  if (family == "logistic") {
    name = "reg_log_" + n;
  } else if (family == "woe_logistic") {
    name = "reg_log_" + n + "_woe";
  } else {
    name = family + "_" + n;
  }
  return searched ? name + "_RS" : name;
}

/// Fits one model family with the configured settings plus `overrides`.
inline PredictorPtr fit_family(const std::string& family, const ModelSettings& s, const TrainConfig& overrides,
                               const Matrix& X, std::span<const int> y, std::uint64_t seed, int threads) {
  if (family == "logistic") {
    if (!overrides.empty()) throw Error(ErrorCode::BadConfig, "logistic takes no hyperparameters");
    return std::make_shared<LogisticModel>(train_logistic(X, y, s.logistic));
  }
  if (family == "woe_logistic") {
    if (!overrides.empty()) throw Error(ErrorCode::BadConfig, "woe_logistic takes no hyperparameters");
    return std::make_shared<WoeLogisticModel>(train_woe_logistic(X, y, s.woe, s.logistic));
  }
  if (family == "rf") {
    auto p = detail::with_overrides(s.rf, overrides);
    p.seed = seed;
    p.threads = threads;
    if (p.mtry > X.cols()) p.mtry = X.cols();
    return std::make_shared<ForestModel>(train_random_forest(X, y, p));
  }
  if (family == "gbm" || family == "xgb") {
    auto p = detail::with_overrides(family == "gbm" ? s.gbm : s.xgb, overrides);
    p.seed = seed;
    return std::make_shared<BoostedModel>(family == "gbm" ? train_gbm(X, y, p) : train_xgb(X, y, p));
  }
  throw Error(ErrorCode::BadConfig, "unknown model family '" + family + "'");
}

inline std::vector<std::string> read_feature_list(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + p.string());
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

struct TrainedModel {
  std::string name;
  std::string family;
  PredictorPtr model;
  MetricReport report;
  std::optional<SearchResult> search;
};

/// Trains the requested families (default: all configured) on the selected
/// features and scores every partition. Families in the search list are
/// tuned on a validation carve of train and refitted on all of train.
inline std::vector<TrainedModel> cmd_train(const RunContext& ctx, std::vector<std::string> families = {},
                                           const std::string& features_file = "") {
  const auto& c = ctx.config;
  if (families.empty()) families = c.models.families;
  for (const auto& f : families) {
    const auto& k = known_families();
    if (std::find(k.begin(), k.end(), f) == k.end()) throw Error(ErrorCode::InvalidArgument, "unknown family '" + f + "'");
  }
  RunDir dir(ctx, "train");
  const auto train = load_part(dir, "train");

  std::vector<std::string> features = train.X.names;
  if (!features_file.empty()) {
    features = read_feature_list(features_file);
    if (features.empty()) throw Error(ErrorCode::InvalidArgument, features_file + " lists no features");
    dir.manifest().inputs["features"] = file_checksum(features_file);
  } else if (c.selection_enabled) {
    dir.require_unchanged("selection/features.txt");
    features = read_feature_list(dir.path("selection/features.txt"));
    if (features.empty()) throw Error(ErrorCode::InvalidArgument, "feature selection left no features to train on");
  }
  const Matrix X = train.X.select_columns(features);

  // Validation carve, shared by every searched family.
  std::vector<std::size_t> order(X.rows);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng carve(c.seed, detail::kValidationStream);
  carve.shuffle(order);
  const auto n_valid = static_cast<std::size_t>(std::llround(c.models.validation_fraction * static_cast<double>(X.rows)));
  std::vector<std::size_t> valid_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_valid));
  std::vector<std::size_t> fit_idx(order.begin() + static_cast<std::ptrdiff_t>(n_valid), order.end());
  std::sort(valid_idx.begin(), valid_idx.end());
  std::sort(fit_idx.begin(), fit_idx.end());
  auto rows_of = [&](const std::vector<std::size_t>& idx, Matrix& Xo, std::vector<int>& yo) {
    Xo = Matrix(X.names, idx.size());
    yo.resize(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const auto src = X.row(idx[r]);
      for (std::size_t j = 0; j < X.cols(); ++j) Xo(r, j) = src[j];
      yo[r] = train.y[idx[r]];
    }
  };

  std::vector<Part> held;
  for (const char* name : {"test", "out_of_sample", "out_of_time"}) held.push_back(load_part(dir, name));
  std::vector<Matrix> held_X;
  for (const auto& p : held) held_X.push_back(p.X.select_columns(features));

  std::vector<TrainedModel> out;
  const std::set<std::string> searched(c.models.search.begin(), c.models.search.end());
  for (const auto& family : families) {
    TrainedModel tm;
    tm.family = family;
    const bool do_search = searched.contains(family) && c.models.search_budget > 0;
    tm.name = model_name(family, features.size(), do_search);
    const auto seed = derive_seed(c.seed, detail::family_stream(family));
    dir.manifest().seeds["model." + family] = seed;
    const auto t0 = std::chrono::steady_clock::now();
    if (do_search) {
      Matrix Xf, Xv;
      std::vector<int> yf, yv;
      rows_of(fit_idx, Xf, yf);
      rows_of(valid_idx, Xv, yv);
      const Trainer trainer = [&](const TrainConfig& cfg, const Matrix& Xt, std::span<const int> yt,
                                  std::uint64_t s) { return fit_family(family, c.models, cfg, Xt, yt, s, 1); };
      auto sr = random_search(c.models.spaces.at(family), trainer, Xf, yf, Xv, yv,
                              static_cast<int>(c.models.search_budget), seed, ctx.threads);
      tm.model = fit_family(family, c.models, sr.best_config, X, train.y, derive_seed(seed, 1 + sr.best_index),
                            ctx.threads);
      tm.search = std::move(sr);
    } else {
      tm.model = fit_family(family, c.models, {}, X, train.y, seed, ctx.threads);
    }
    const double learn = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::vector<EvalPart> parts{{"train", &X, train.y, true}};
    for (std::size_t k = 0; k < held.size(); ++k) parts.push_back({held[k].name, &held_X[k], held[k].y, true});
    tm.report = evaluate(*tm.model, tm.name, parts, learn);

    auto mj = tm.model->to_json();
    mj["model_name"] = tm.name;
    dir.write_json_artifact("models/" + tm.name + ".json", mj);
    if (tm.search) {
      auto sj = to_json(*tm.search);
      sj["schema_version"] = kPipelineSchemaVersion;
      sj["model_name"] = tm.name;
      sj["validation_rows"] = n_valid;
      sj["metric"] = "gini";
      dir.write_json_artifact("models/" + tm.name + ".search.json", sj);
    }
    dir.write_json_artifact("reports/" + tm.name + ".metrics.json", to_json(tm.report));
    auto timing = timing_json(tm.report);
    timing["event"] = "trained";
    dir.log(timing);
    out.push_back(std::move(tm));
  }
  dir.save();
  return out;
}

// ---------------------------------------------------------------------------
// predict

/// Resolves a model argument: a path to a model file, or a model name under
/// <out>/models/.
inline fs::path model_path(const RunDir& dir, const std::string& arg) {
  if (fs::exists(arg) && fs::is_regular_file(arg)) return arg;
  const auto p = dir.path("models/" + arg + ".json");
  if (fs::exists(p)) return p;
  throw Error(ErrorCode::InvalidArgument, "no model '" + arg + "'");
}

inline std::string model_label(const fs::path& p) {
  const auto j = read_json(p.string());
  return j.value("model_name", p.stem().string());
}

/// Scores a CSV with the frozen preprocessor. The target and date columns
/// may be absent. Writes "row,score" lines.
inline fs::path cmd_predict(const RunContext& ctx, const std::string& model_arg, const std::string& data_path,
                            std::string output = "") {
  RunDir dir(ctx, "predict");
  const auto mp = model_path(dir, model_arg);
  const auto model = load_model_file(mp.string());
  dir.require_frozen("splits/preprocess.json");
  const auto pre = Preprocessor::from_json(read_json(dir.path("splits/preprocess.json").string()).at("preprocessor"));
  auto schema = split_schema(ctx.config);
  schema.require_target = false;
  const auto d = pre.apply(load_csv(data_path, schema));
  const auto X = d.to_matrix(model->feature_names());
  const auto t0 = std::chrono::steady_clock::now();
  const auto scores = model->predict(X);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::string text = "row,score\n";
  for (std::size_t i = 0; i < scores.size(); ++i) text += std::to_string(i) + "," + csv::format_double(scores[i]) + "\n";
  const std::string label = model_label(mp);
  fs::path dest;
  if (output.empty()) {
    dir.write("predictions/" + detail::sanitize(label) + ".csv", text);
    dest = dir.path("predictions/" + detail::sanitize(label) + ".csv");
  } else {
    dest = output;
    if (dest.has_parent_path()) fs::create_directories(dest.parent_path());
    std::ofstream out(dest, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + output);
    out << text;
  }
  dir.log({{"event", "predicted"}, {"model", label}, {"rows", scores.size()}, {"predict_seconds", seconds}});
  dir.save();
  return dest;
}

// ---------------------------------------------------------------------------
// explain

struct ExplainRequest {
  std::string method;               // pfi, pdp, pdp2, cp, bd
  std::vector<std::string> models;  // names or paths; pdp overlays several
  std::vector<std::string> features;
  std::size_t instance = 0;
  std::vector<std::string> order;  // bd; empty = greedy
  std::string split;               // empty = config
};

/// Runs one explanation and returns the written JSON path.
inline fs::path cmd_explain(const RunContext& ctx, const ExplainRequest& req) {
  const auto& c = ctx.config;
  static const std::set<std::string> methods{"pfi", "pdp", "pdp2", "cp", "bd"};
  if (!methods.contains(req.method)) throw Error(ErrorCode::InvalidArgument, "unknown method '" + req.method + "'");
  if (req.models.empty()) throw Error(ErrorCode::InvalidArgument, "explain needs a model");
  if (req.models.size() > 1 && req.method != "pdp") {
    throw Error(ErrorCode::InvalidArgument, "only pdp accepts several models");
  }
  if ((req.method == "pdp" || req.method == "cp") && req.features.size() != 1) {
    throw Error(ErrorCode::InvalidArgument, req.method + " needs exactly one feature");
  }
  if (req.method == "pdp2" && req.features.size() != 2) throw Error(ErrorCode::InvalidArgument, "pdp2 needs two features");

  RunDir dir(ctx, "explain");
  std::vector<PredictorPtr> models;
  std::vector<std::string> labels;
  for (const auto& m : req.models) {
    const auto p = model_path(dir, m);
    models.push_back(load_model_file(p.string()));
    labels.push_back(model_label(p));
  }
  const std::string split = req.split.empty() ? c.explain.split : req.split;
  const auto data = load_part(dir, split);
  const auto train = load_part(dir, "train");

  // Background: a seeded sample of train rows, kept in row order.
  std::vector<std::size_t> idx(train.X.rows);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(c.seed, detail::kBackgroundStream);
  rng.shuffle(idx);
  idx.resize(std::min(idx.size(), c.explain.background));
  std::sort(idx.begin(), idx.end());
  Matrix background(train.X.names, idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto src = train.X.row(idx[r]);
    for (std::size_t j = 0; j < train.X.cols(); ++j) background(r, j) = src[j];
  }

  std::string stem;
  for (std::size_t k = 0; k < labels.size(); ++k) stem += (k ? "+" : "") + labels[k];
  stem = detail::sanitize(stem) + "." + req.method;
  for (const auto& f : req.features) stem += "." + detail::sanitize(f);
  if (req.method == "cp" || req.method == "bd") stem += ".i" + std::to_string(req.instance);

  nlohmann::json j;
  std::string svg_text;
  GridSpec grid;
  grid.quantiles = c.explain.grid_quantiles;
  const auto t0 = std::chrono::steady_clock::now();
  if (req.method == "pfi") {
    auto r = permutation_importance(*models[0], data.X, data.y, c.explain.pfi_repeats, derive_seed(c.seed, detail::kPfiStream), {},
                                    ctx.threads);
    j = to_json(r);
    auto recs = r.records;
    std::stable_sort(recs.begin(), recs.end(), [](const auto& a, const auto& b) { return a.mean_drop > b.mean_drop; });
    std::vector<std::string> names;
    std::vector<double> values;
    for (const auto& rec : recs) names.push_back(rec.feature), values.push_back(rec.mean_drop);
    svg_text = svg::bar_chart("Permutation importance: " + labels[0], names, values, "mean AUC drop");
  } else if (req.method == "pdp") {
    grid.points = make_grid(background, req.features[0], grid);
    nlohmann::json profiles = nlohmann::json::array();
    std::vector<svg::Series> series;
    for (std::size_t k = 0; k < models.size(); ++k) {
      auto p = partial_dependence(*models[k], background, req.features[0], grid, ctx.threads);
      auto pj = to_json(p);
      pj["model_name"] = labels[k];
      profiles.push_back(pj);
      series.push_back({labels[k], p.grid, p.mean_prediction});
    }
    j = {{"schema_version", kExplainSchemaVersion}, {"method", "pdp"}, {"feature", req.features[0]},
         {"profiles", profiles}};
    svg_text = svg::line_chart("Partial dependence", series, req.features[0], "mean prediction");
  } else if (req.method == "pdp2") {
    auto p = partial_dependence_2d(*models[0], background, req.features[0], req.features[1], grid, ctx.threads);
    j = to_json(p);
  } else if (req.method == "cp") {
    auto p = ceteris_paribus(*models[0], data.X, req.instance, req.features[0], grid);
    j = to_json(p);
    svg_text = svg::line_chart("Ceteris paribus, row " + std::to_string(req.instance), {{labels[0], p.grid, p.prediction}},
                               req.features[0], "prediction");
  } else {
    auto r = break_down(*models[0], background, data.X, req.instance, req.order, ctx.threads);
    j = to_json(r);
    std::vector<std::pair<std::string, double>> steps;
    for (const auto& s : r.contributions) steps.emplace_back(s.feature + " = " + csv::format_double(s.value), s.delta);
    svg_text = svg::waterfall("Break Down, row " + std::to_string(req.instance), r.intercept, steps, r.final_prediction);
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  j["model_names"] = labels;
  j["split"] = split;
  const std::string rel = "explain/" + stem + ".json";
  dir.write_json_artifact(rel, j);
  if (!svg_text.empty()) dir.write("explain/" + stem + ".svg", svg_text);
  dir.log({{"event", "explained"}, {"method", req.method}, {"artifact", rel}, {"seconds", seconds}});
  dir.save();
  return dir.path(rel);
}

// ---------------------------------------------------------------------------
// report

struct ReportRow {
  MetricReport report;
  bool has_timing = false;
};

/// Comparison table over every metrics file under <out>/reports, sorted by
/// out-of-time Gini (missing values last, ties by name), plus the dot plot
/// data and the rejection decisions.
inline std::vector<ModelDecision> cmd_report(const RunContext& ctx) {
  RunDir dir(ctx, "report");
  std::vector<std::string> files;
  if (fs::exists(dir.path("reports"))) {
    for (const auto& e : fs::directory_iterator(dir.path("reports"))) {
      const auto name = e.path().filename().string();
      if (name.ends_with(".metrics.json")) files.push_back("reports/" + name);
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(ErrorCode::InvalidArgument, "no metric reports under " + dir.path("reports").string());

  // Latest timing per model from the run log.
  std::map<std::string, nlohmann::json> timing;
  if (fs::exists(dir.path("run_log.jsonl"))) {
    std::ifstream in(dir.path("run_log.jsonl"));
    for (std::string line; std::getline(in, line);) {
      if (line.empty()) continue;
      const auto e = nlohmann::json::parse(line, nullptr, false);
      if (e.is_object() && e.value("event", "") == "trained") timing[e.value("model_name", "")] = e;
    }
  }

  std::vector<ReportRow> rows;
  for (const auto& f : files) {
    dir.require_unchanged(f);
    const auto j = read_json(dir.path(f).string());
    const auto name = j.at("model_name").get<std::string>();
    auto it = timing.find(name);
    rows.push_back({report_from_json(j, it == timing.end() ? nullptr : &it->second), it != timing.end()});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
    const auto ga = a.report.gini_of("out_of_time"), gb = b.report.gini_of("out_of_time");
    if (ga.has_value() != gb.has_value()) return ga.has_value();
    if (ga && *ga != *gb) return *ga > *gb;
    return a.report.model_name < b.report.model_name;
  });

  std::vector<MetricReport> reports;
  for (const auto& r : rows) reports.push_back(r.report);
  const auto decisions = reject_models(reports, ctx.config.min_gini, ctx.config.expert_rejected);
  std::map<std::string, const ModelDecision*> by_name;
  for (const auto& d : decisions) by_name[d.model_name] = &d;

  auto cell = [](std::optional<double> v) { return v ? csv::format_double(*v) : std::string("n/a"); };
  std::ostringstream table;
  table << "Name of the model,Gini Train,Gini Test,Gini out of sample,Gini out of time,K-S out of time,"
           "Learning time (min),Prediction time (sec),Comment\n";
  nlohmann::json dots = nlohmann::json::array();
  for (const auto& row : rows) {
    const auto& r = row.report;
    const auto* oot = r.find("out_of_time");
    table << r.model_name;
    nlohmann::json dj{{"model_name", r.model_name}};
    for (const char* s : kSplitNames) {
      const auto g = r.gini_of(s);
      table << ',' << cell(g);
      dj[s] = g ? nlohmann::json(*g) : nlohmann::json(nullptr);
    }
    table << ',' << cell(oot ? oot->ks : std::nullopt);
    if (row.has_timing) {
      table << ',' << csv::format_double(r.learn_seconds / 60.0) << ',' << csv::format_double(r.predict_seconds);
    } else {
      table << ",n/a,n/a";
    }
    const auto* d = by_name.at(r.model_name);
    table << ',' << (d->rejected ? "rejected: " + d->reason : std::string()) << '\n';
    dots.push_back(std::move(dj));
  }
  dir.write("report/table1.csv", table.str(), /*is_volatile=*/true);
  dir.write_json_artifact("report/dotplot.json",
                          {{"schema_version", kPipelineSchemaVersion}, {"metric", "gini"}, {"models", dots}});
  dir.write_json_artifact("report/rejections.json", {{"schema_version", kPipelineSchemaVersion},
                                                     {"min_gini", ctx.config.min_gini},
                                                     {"expert_rejected", ctx.config.expert_rejected},
                                                     {"decisions", to_json(decisions)}});

  std::vector<svg::Series> series;
  for (const char* s : kSplitNames) {
    svg::Series ser{s, {}, {}};
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if (auto g = rows[k].report.gini_of(s)) ser.x.push_back(static_cast<double>(k + 1)), ser.y.push_back(*g);
    }
    series.push_back(std::move(ser));
  }
  dir.write("report/dotplot.svg", svg::line_chart("Gini by partition (models in table order)", series, "model rank", "Gini"));
  dir.log({{"event", "reported"}, {"models", reports.size()}});
  dir.save();
  return decisions;
}

}  // namespace cxai
