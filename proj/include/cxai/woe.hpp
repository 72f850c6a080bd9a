#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cxai/common.hpp"
#include "cxai/dataset.hpp"

namespace cxai {

/// Discretization of one feature. Numeric values land in bin
/// `#cut_points <= x`; categorical levels go through `level_bins`. Regular
/// bins are 0..n_bins-1; a missing bin, when fitted, is n_bins.
struct BinningSpec {
  std::string feature;
  FeatureKind kind = FeatureKind::Numeric;
  std::vector<double> cut_points;
  std::map<std::string, int> level_bins;
  int n_bins = 1;
  std::optional<int> missing_bin;
  int fallback_bin = 0;  // missing (without a missing bin) and unseen levels
  bool degenerate = false;

  int total_bins() const { return n_bins + (missing_bin ? 1 : 0); }

  int bin_of(std::optional<double> x) const {
    if (!x) return missing_bin.value_or(fallback_bin);
    return static_cast<int>(std::upper_bound(cut_points.begin(), cut_points.end(), *x) - cut_points.begin());
  }

  int bin_of(const std::optional<std::string>& level) const {
    if (!level) return missing_bin.value_or(fallback_bin);
    auto it = level_bins.find(*level);
    if (it == level_bins.end()) return missing_bin.value_or(fallback_bin);
    return it->second;
  }

  bool operator==(const BinningSpec&) const = default;
};

struct BinningOptions {
  int max_bins = 10;
  double min_bin_frac = 0.05;
  bool monotone = false;  // additionally merge until bad rates are monotone
};

namespace detail {

struct BinCounts {
  double good = 0, bad = 0;
  double n() const { return good + bad; }
};

/// Merges adjacent bins until every bin holds min_rows and both classes.
/// `merge(k)` fuses bins k and k+1 in the caller's representation.
template <typename MergeFn>
void merge_to_valid(std::vector<BinCounts>& bins, double min_rows, MergeFn merge) {
  auto invalid = [&](const BinCounts& b) { return b.n() < min_rows || b.good == 0 || b.bad == 0; };
  while (bins.size() > 1) {
    std::ptrdiff_t worst = -1;
    for (std::size_t k = 0; k < bins.size(); ++k) {
      if (invalid(bins[k]) && (worst < 0 || bins[k].n() < bins[static_cast<std::size_t>(worst)].n())) {
        worst = static_cast<std::ptrdiff_t>(k);
      }
    }
    if (worst < 0) return;
    auto k = static_cast<std::size_t>(worst);
    std::size_t left;
    if (k == 0) {
      left = 0;
    } else if (k + 1 == bins.size()) {
      left = k - 1;
    } else {
      left = bins[k - 1].n() <= bins[k + 1].n() ? k - 1 : k;
    }
    bins[left].good += bins[left + 1].good;
    bins[left].bad += bins[left + 1].bad;
    bins.erase(bins.begin() + static_cast<std::ptrdiff_t>(left) + 1);
    merge(left);
  }
}

template <typename MergeFn>
void merge_to_monotone(std::vector<BinCounts>& bins, MergeFn merge) {
  if (bins.size() < 3) return;
  auto rate = [](const BinCounts& b) { return b.bad / b.n(); };
  const bool increasing = rate(bins.back()) >= rate(bins.front());
  for (bool changed = true; changed && bins.size() > 1;) {
    changed = false;
    for (std::size_t k = 0; k + 1 < bins.size(); ++k) {
      const bool ok = increasing ? rate(bins[k]) <= rate(bins[k + 1]) : rate(bins[k]) >= rate(bins[k + 1]);
      if (!ok) {
        bins[k].good += bins[k + 1].good;
        bins[k].bad += bins[k + 1].bad;
        bins.erase(bins.begin() + static_cast<std::ptrdiff_t>(k) + 1);
        merge(k);
        changed = true;
        break;
      }
    }
  }
}

inline void check_target(std::span<const int> y, std::size_t n) {
  if (y.size() != n) throw Error(ErrorCode::InvalidArgument, "feature/target length mismatch");
  for (int t : y) {
    if (t != 0 && t != 1) throw Error(ErrorCode::BadTarget, "target must be 0/1");
  }
}

}  // namespace detail

/// Quantile binning followed by merging of undersized or single-class bins.
inline BinningSpec fit_bins(const Feature& x, std::span<const int> y, const BinningOptions& opt = {}) {
  detail::check_target(y, x.size());
  if (opt.max_bins < 2) throw Error(ErrorCode::InvalidArgument, "max_bins must be at least 2");
  std::size_t n_bad = 0;
  for (int t : y) n_bad += t;
  if (n_bad == 0 || n_bad == y.size()) throw Error(ErrorCode::OneClassOnly, "binning needs both classes");

  BinningSpec spec;
  spec.feature = x.name;
  spec.kind = x.kind;
  detail::BinCounts missing;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x.is_missing(i)) (y[i] ? missing.bad : missing.good) += 1;
  }
  const double n_present = static_cast<double>(x.size()) - missing.n();
  const double min_rows = std::max(1.0, opt.min_bin_frac * n_present);

  std::vector<detail::BinCounts> bins;
  if (x.kind == FeatureKind::Numeric) {
    std::vector<std::pair<double, int>> obs;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x.numeric[i]) obs.emplace_back(*x.numeric[i], y[i]);
    }
    std::sort(obs.begin(), obs.end());
    std::vector<double> cuts;
    if (!obs.empty()) {
      for (int k = 1; k < opt.max_bins; ++k) {
        const auto pos = static_cast<std::size_t>(
            std::ceil(static_cast<double>(k) * static_cast<double>(obs.size()) / opt.max_bins));
        if (pos >= obs.size()) break;
        const double c = obs[pos].first;
        if (c > obs.front().first && (cuts.empty() || c > cuts.back())) cuts.push_back(c);
      }
    }
    bins.assign(cuts.size() + 1, {});
    for (const auto& [v, t] : obs) {
      auto b = static_cast<std::size_t>(std::upper_bound(cuts.begin(), cuts.end(), v) - cuts.begin());
      (t ? bins[b].bad : bins[b].good) += 1;
    }
    const auto drop_cut = [&cuts](std::size_t k) { cuts.erase(cuts.begin() + static_cast<std::ptrdiff_t>(k)); };
    spec.degenerate = obs.empty() || obs.front().first == obs.back().first;
    if (!spec.degenerate) {
      detail::merge_to_valid(bins, min_rows, drop_cut);
      if (opt.monotone) detail::merge_to_monotone(bins, drop_cut);
    }
    spec.cut_points = std::move(cuts);
  } else {
    std::map<std::string, detail::BinCounts> per_level;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x.categorical[i]) (y[i] ? per_level[*x.categorical[i]].bad : per_level[*x.categorical[i]].good) += 1;
    }
    // Levels ordered by bad rate so adjacent merges join similar levels.
    std::vector<std::pair<std::string, detail::BinCounts>> levels(per_level.begin(), per_level.end());
    std::stable_sort(levels.begin(), levels.end(), [](const auto& l, const auto& r) {
      return l.second.bad / l.second.n() < r.second.bad / r.second.n();
    });
    std::vector<std::vector<std::string>> groups;
    for (const auto& [name, c] : levels) {
      groups.push_back({name});
      bins.push_back(c);
    }
    const auto fuse = [&groups](std::size_t k) {
      groups[k].insert(groups[k].end(), groups[k + 1].begin(), groups[k + 1].end());
      groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(k) + 1);
    };
    while (bins.size() > static_cast<std::size_t>(opt.max_bins)) {
      std::size_t k = 0;
      for (std::size_t j = 1; j + 1 < bins.size(); ++j) {
        if (bins[j].n() + bins[j + 1].n() < bins[k].n() + bins[k + 1].n()) k = j;
      }
      bins[k].good += bins[k + 1].good;
      bins[k].bad += bins[k + 1].bad;
      bins.erase(bins.begin() + static_cast<std::ptrdiff_t>(k) + 1);
      fuse(k);
    }
    spec.degenerate = levels.size() <= 1;
    if (!spec.degenerate) {
      detail::merge_to_valid(bins, min_rows, fuse);
      if (opt.monotone) detail::merge_to_monotone(bins, fuse);
    }
    for (std::size_t b = 0; b < groups.size(); ++b) {
      for (const auto& name : groups[b]) spec.level_bins[name] = static_cast<int>(b);
    }
    if (bins.empty()) bins.push_back({});
  }
  spec.n_bins = static_cast<int>(bins.size());
  if (spec.degenerate) warn("feature '" + x.name + "' is degenerate (single value); one bin");
  if (missing.n() > 0) spec.missing_bin = spec.n_bins;
  std::size_t largest = 0;
  for (std::size_t b = 1; b < bins.size(); ++b) {
    if (bins[b].n() > bins[largest].n()) largest = b;
  }
  spec.fallback_bin = static_cast<int>(largest);
  return spec;
}

inline BinningSpec fit_bins(std::span<const double> x, std::span<const int> y, const BinningOptions& opt = {},
                            const std::string& name = "x") {
  std::vector<std::optional<double>> v(x.begin(), x.end());
  return fit_bins(Feature::make_numeric(name, std::move(v)), y, opt);
}

struct WoeBin {
  int bin = 0;
  double n_good = 0, n_bad = 0;
  double dist_good = 0, dist_bad = 0;
  double woe = 0, iv_term = 0;

  bool operator==(const WoeBin&) const = default;
};

struct WoeTable {
  BinningSpec spec;
  std::vector<WoeBin> bins;
  double iv = 0;
  double smoothing = 0.5;

  const std::string& feature() const { return spec.feature; }
  double woe_of(std::optional<double> x) const { return bins[static_cast<std::size_t>(spec.bin_of(x))].woe; }
  double woe_of(const std::optional<std::string>& x) const {
    return bins[static_cast<std::size_t>(spec.bin_of(x))].woe;
  }

  bool operator==(const WoeTable&) const = default;
};

/// Fills per-bin WOE and IV terms from good/bad counts:
///   dist_b = (n_b + s) / (N + s * B),  woe_b = ln(dist_good_b / dist_bad_b),
///   iv = sum_b (dist_good_b - dist_bad_b) * woe_b.
inline WoeTable woe_from_counts(BinningSpec spec, std::span<const double> n_good, std::span<const double> n_bad,
                                double smoothing) {
  if (n_good.size() != n_bad.size()) throw Error(ErrorCode::InvalidArgument, "count length mismatch");
  WoeTable t;
  t.spec = std::move(spec);
  t.smoothing = smoothing;
  const double nb = static_cast<double>(n_good.size());
  double total_good = 0, total_bad = 0;
  for (std::size_t b = 0; b < n_good.size(); ++b) {
    total_good += n_good[b];
    total_bad += n_bad[b];
  }
  for (std::size_t b = 0; b < n_good.size(); ++b) {
    WoeBin r;
    r.bin = static_cast<int>(b);
    r.n_good = n_good[b];
    r.n_bad = n_bad[b];
    r.dist_good = (n_good[b] + smoothing) / (total_good + smoothing * nb);
    r.dist_bad = (n_bad[b] + smoothing) / (total_bad + smoothing * nb);
    r.woe = std::log(r.dist_good / r.dist_bad);
    r.iv_term = (r.dist_good - r.dist_bad) * r.woe;
    t.iv += r.iv_term;
    t.bins.push_back(r);
  }
  return t;
}

inline WoeTable compute_woe(const BinningSpec& spec, const Feature& x, std::span<const int> y,
                            double smoothing = 0.5) {
  detail::check_target(y, x.size());
  if (smoothing < 0) throw Error(ErrorCode::InvalidArgument, "smoothing must be non-negative");
  std::vector<double> good(static_cast<std::size_t>(spec.total_bins())), bad(good.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const int b = x.kind == FeatureKind::Numeric ? spec.bin_of(x.numeric[i]) : spec.bin_of(x.categorical[i]);
    (y[i] ? bad : good)[static_cast<std::size_t>(b)] += 1;
  }
  return woe_from_counts(spec, good, bad, smoothing);
}

/// Replaces every feature covered by a table with its per-row WOE value.
/// Uncovered features pass through unless `pass_through` is false.
inline Dataset woe_transform(const Dataset& d, const std::vector<WoeTable>& tables, bool pass_through = true) {
  std::map<std::string, const WoeTable*> by_name;
  for (const auto& t : tables) by_name[t.feature()] = &t;
  Dataset out = d;
  for (auto& c : out.columns) {
    auto it = by_name.find(c.name);
    if (it == by_name.end()) {
      if (!pass_through) throw Error(ErrorCode::UnknownColumn, "no WOE table for '" + c.name + "'");
      continue;
    }
    const auto& t = *it->second;
    if (t.spec.kind != c.kind) throw Error(ErrorCode::InvalidArgument, "kind mismatch for '" + c.name + "'");
    std::vector<std::optional<double>> v(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
      v[i] = c.kind == FeatureKind::Numeric ? t.woe_of(c.numeric[i]) : t.woe_of(c.categorical[i]);
    }
    c = Feature::make_numeric(c.name, std::move(v));
  }
  return out;
}

/// Fits binning and WOE for every named feature of a training set.
inline std::vector<WoeTable> fit_woe_tables(const Dataset& train, const std::vector<std::string>& features,
                                            const BinningOptions& opt = {}, double smoothing = 0.5) {
  std::vector<WoeTable> out;
  for (const auto& name : features) {
    const auto& c = train.column(name);
    out.push_back(compute_woe(fit_bins(c, train.target, opt), c, train.target, smoothing));
  }
  return out;
}

// JSON: the audit artifact a scorecard validator reads.

inline void to_json(nlohmann::json& j, const BinningSpec& s) {
  j = nlohmann::json{{"feature", s.feature},
                     {"kind", to_string(s.kind)},
                     {"cut_points", s.cut_points},
                     {"level_bins", s.level_bins},
                     {"n_bins", s.n_bins},
                     {"fallback_bin", s.fallback_bin},
                     {"degenerate", s.degenerate}};
  j["missing_bin"] = s.missing_bin ? nlohmann::json(*s.missing_bin) : nlohmann::json(nullptr);
}

inline void from_json(const nlohmann::json& j, BinningSpec& s) {
  s.feature = j.at("feature").get<std::string>();
  s.kind = j.at("kind").get<std::string>() == "numeric" ? FeatureKind::Numeric : FeatureKind::Categorical;
  j.at("cut_points").get_to(s.cut_points);
  j.at("level_bins").get_to(s.level_bins);
  s.n_bins = j.at("n_bins").get<int>();
  s.fallback_bin = j.at("fallback_bin").get<int>();
  s.degenerate = j.at("degenerate").get<bool>();
  s.missing_bin.reset();
  if (!j.at("missing_bin").is_null()) s.missing_bin = j.at("missing_bin").get<int>();
}

inline void to_json(nlohmann::json& j, const WoeTable& t) {
  nlohmann::json bins = nlohmann::json::array();
  for (const auto& b : t.bins) {
    bins.push_back({{"bin", b.bin},
                    {"n_good", b.n_good},
                    {"n_bad", b.n_bad},
                    {"dist_good", b.dist_good},
                    {"dist_bad", b.dist_bad},
                    {"woe", b.woe},
                    {"iv_term", b.iv_term}});
  }
  j = nlohmann::json{{"feature", t.feature()}, {"binning", t.spec}, {"bins", bins}, {"iv", t.iv},
                     {"smoothing", t.smoothing}};
}

inline void from_json(const nlohmann::json& j, WoeTable& t) {
  j.at("binning").get_to(t.spec);
  t.iv = j.at("iv").get<double>();
  t.smoothing = j.at("smoothing").get<double>();
  t.bins.clear();
  for (const auto& b : j.at("bins")) {
    WoeBin r;
    r.bin = b.at("bin").get<int>();
    r.n_good = b.at("n_good").get<double>();
    r.n_bad = b.at("n_bad").get<double>();
    r.dist_good = b.at("dist_good").get<double>();
    r.dist_bad = b.at("dist_bad").get<double>();
    r.woe = b.at("woe").get<double>();
    r.iv_term = b.at("iv_term").get<double>();
    t.bins.push_back(r);
  }
}

}  // namespace cxai
