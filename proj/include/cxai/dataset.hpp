#pragma once

#include <charconv>
#include <compare>
#include <cstdio>
#include <map>
#include <optional>
#include <ranges>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "cxai/common.hpp"
#include "cxai/csv.hpp"
#include "cxai/matrix.hpp"

namespace cxai {

/// Calendar date stored as days since 1970-01-01.
struct Date {
  std::int32_t days = 0;

  static constexpr Date from_ymd(int y, unsigned m, unsigned d) {
    // Howard Hinnant's days_from_civil.
    y -= m <= 2;
    const int era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return Date{static_cast<std::int32_t>(era * 146097 + static_cast<int>(doe) - 719468)};
  }

  void to_ymd(int& y, unsigned& m, unsigned& d) const {
    const int z = days + 719468;
    const int era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp < 10 ? mp + 3 : mp - 9;
    y = static_cast<int>(yoe) + era * 400 + (m <= 2);
  }

  /// Accepts YYYY-MM-DD.
  static std::optional<Date> parse(std::string_view s) {
    int y = 0;
    unsigned m = 0, d = 0;
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    auto num = [&](std::size_t pos, std::size_t len, auto& out) {
      auto [p, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, out);
      return ec == std::errc{} && p == s.data() + pos + len;
    };
    if (!num(0, 4, y) || !num(5, 2, m) || !num(8, 2, d)) return std::nullopt;
    if (m < 1 || m > 12 || d < 1 || d > 31) return std::nullopt;
    const Date out = from_ymd(y, m, d);
    int y2;
    unsigned m2, d2;
    out.to_ymd(y2, m2, d2);
    if (m2 != m || d2 != d) return std::nullopt;
    return out;
  }

  std::string str() const {
    int y;
    unsigned m, d;
    to_ymd(y, m, d);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", y, m, d);
    return buf;
  }

  auto operator<=>(const Date&) const = default;
};

enum class FeatureKind { Numeric, Categorical };

inline const char* to_string(FeatureKind k) { return k == FeatureKind::Numeric ? "numeric" : "categorical"; }

/// Level assigned to missing categorical cells by imputation.
inline const std::string kMissingLevel = "MISSING";

/// One named column. Exactly one of `numeric` / `categorical` is populated,
/// matching `kind`; std::nullopt is the missing marker.
struct Feature {
  std::string name;
  FeatureKind kind = FeatureKind::Numeric;
  std::vector<std::optional<double>> numeric;
  std::vector<std::optional<std::string>> categorical;

  static Feature make_numeric(std::string n, std::vector<std::optional<double>> v) {
    Feature f;
    f.name = std::move(n);
    f.kind = FeatureKind::Numeric;
    f.numeric = std::move(v);
    return f;
  }

  static Feature make_categorical(std::string n, std::vector<std::optional<std::string>> v) {
    Feature f;
    f.name = std::move(n);
    f.kind = FeatureKind::Categorical;
    f.categorical = std::move(v);
    return f;
  }

  std::size_t size() const { return kind == FeatureKind::Numeric ? numeric.size() : categorical.size(); }

  bool is_missing(std::size_t i) const {
    return kind == FeatureKind::Numeric ? !numeric[i].has_value() : !categorical[i].has_value();
  }

  std::size_t n_missing() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < size(); ++i) n += is_missing(i);
    return n;
  }

  std::size_t n_unique() const {
    if (kind == FeatureKind::Numeric) {
      std::set<double> s;
      for (const auto& v : numeric) {
        if (v) s.insert(*v);
      }
      return s.size();
    }
    return levels().size();
  }

  /// Distinct non-missing categorical levels, sorted.
  std::vector<std::string> levels() const {
    std::set<std::string> s;
    for (const auto& v : categorical) {
      if (v) s.insert(*v);
    }
    return {s.begin(), s.end()};
  }

  Feature take(std::span<const std::size_t> idx) const {
    Feature f;
    f.name = name;
    f.kind = kind;
    if (kind == FeatureKind::Numeric) {
      f.numeric.reserve(idx.size());
      for (auto i : idx) f.numeric.push_back(numeric[i]);
    } else {
      f.categorical.reserve(idx.size());
      for (auto i : idx) f.categorical.push_back(categorical[i]);
    }
    return f;
  }

  bool operator==(const Feature&) const = default;
};

/// Feature columns plus binary target (1 = bad) and optional observation date.
struct Dataset {
  std::vector<Feature> columns;
  std::vector<int> target;
  std::vector<Date> obs_date;  // empty when the data carries no date column
  std::string target_name = "target";
  std::string date_name;

  std::size_t n_rows() const { return target.size(); }
  bool has_dates() const { return !obs_date.empty(); }

  std::ptrdiff_t find(const std::string& name) const {
    for (std::size_t j = 0; j < columns.size(); ++j) {
      if (columns[j].name == name) return static_cast<std::ptrdiff_t>(j);
    }
    return -1;
  }

  const Feature& column(const std::string& name) const {
    const auto j = find(name);
    if (j < 0) throw Error(ErrorCode::UnknownColumn, "no column '" + name + "'");
    return columns[static_cast<std::size_t>(j)];
  }

  std::vector<std::string> feature_names() const {
    std::vector<std::string> out;
    for (const auto& c : columns) out.push_back(c.name);
    return out;
  }

  std::size_t count_bad() const {
    std::size_t n = 0;
    for (int t : target) n += (t == 1);
    return n;
  }

  bool has_both_classes() const {
    const auto bad = count_bad();
    return bad > 0 && bad < n_rows();
  }

  /// Throws on any broken structural invariant.
  void validate() const {
    std::set<std::string> seen;
    for (const auto& c : columns) {
      if (c.size() != n_rows()) {
        throw Error(ErrorCode::InvalidArgument, "column '" + c.name + "' has wrong length");
      }
      if (!seen.insert(c.name).second) {
        throw Error(ErrorCode::InvalidArgument, "duplicate column '" + c.name + "'");
      }
    }
    for (int t : target) {
      if (t != 0 && t != 1) throw Error(ErrorCode::BadTarget, "target must be 0/1");
    }
    if (has_dates() && obs_date.size() != n_rows()) {
      throw Error(ErrorCode::InvalidArgument, "obs_date has wrong length");
    }
  }

  Dataset take_rows(std::span<const std::size_t> idx) const {
    Dataset out;
    out.target_name = target_name;
    out.date_name = date_name;
    out.columns.reserve(columns.size());
    for (const auto& c : columns) out.columns.push_back(c.take(idx));
    out.target.reserve(idx.size());
    for (auto i : idx) out.target.push_back(target[i]);
    if (has_dates()) {
      out.obs_date.reserve(idx.size());
      for (auto i : idx) out.obs_date.push_back(obs_date[i]);
    }
    return out;
  }

  Dataset select_columns(const std::vector<std::string>& names) const {
    Dataset out = *this;
    out.columns.clear();
    for (const auto& n : names) out.columns.push_back(column(n));
    return out;
  }

  /// Dense view of the given (default: all) columns. Every requested column
  /// must be numeric and free of missing values.
  Matrix to_matrix(const std::vector<std::string>& names = {}) const {
    const auto wanted = names.empty() ? feature_names() : names;
    Matrix m(wanted, n_rows());
    for (std::size_t k = 0; k < wanted.size(); ++k) {
      const auto& c = column(wanted[k]);
      if (c.kind != FeatureKind::Numeric) {
        throw Error(ErrorCode::InvalidArgument, "column '" + c.name + "' is categorical; encode it first");
      }
      for (std::size_t i = 0; i < n_rows(); ++i) {
        if (!c.numeric[i]) throw Error(ErrorCode::InvalidArgument, "column '" + c.name + "' has missing values");
        m(i, k) = *c.numeric[i];
      }
    }
    return m;
  }

  bool operator==(const Dataset&) const = default;
};

// ---------------------------------------------------------------------------
// CSV I/O

/// Column-kind declarations for load_csv. With `columns` empty every header
/// column other than target/date is read, as categorical when named in
/// `categorical` and as numeric otherwise.
struct Schema {
  std::string target = "target";
  std::string date;
  std::map<std::string, FeatureKind> columns;
  std::set<std::string> categorical;
  std::string missing_token = "NA";
  bool require_target = true;  // false when scoring unlabelled rows; not serialized
};

inline void to_json(nlohmann::json& j, const Schema& s) {
  j = nlohmann::json{{"target", s.target}, {"date", s.date}, {"missing_token", s.missing_token}};
  nlohmann::json cols = nlohmann::json::object();
  for (const auto& [k, v] : s.columns) cols[k] = to_string(v);
  j["columns"] = cols;
  j["categorical"] = s.categorical;
}

inline void from_json(const nlohmann::json& j, Schema& s) {
  s.target = j.value("target", s.target);
  s.date = j.value("date", s.date);
  s.missing_token = j.value("missing_token", s.missing_token);
  s.columns.clear();
  s.categorical = j.value("categorical", std::set<std::string>{});
  if (j.contains("columns")) {
    for (const auto& [k, v] : j.at("columns").items()) {
      const auto kind = v.get<std::string>();
      if (kind == "numeric") {
        s.columns[k] = FeatureKind::Numeric;
      } else if (kind == "categorical") {
        s.columns[k] = FeatureKind::Categorical;
      } else {
        throw Error(ErrorCode::BadConfig, "column '" + k + "' has unknown kind '" + kind + "'");
      }
    }
  }
}

namespace detail {

inline std::optional<double> parse_number(const std::string& cell, const std::string& missing_token) {
  if (cell.empty() || cell == missing_token) return std::nullopt;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  while (first < last && *first == ' ') ++first;
  while (last > first && last[-1] == ' ') --last;
  if (first < last && *first == '+') ++first;
  double v = 0;
  auto [p, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || p != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace detail

inline Dataset parse_csv(std::istream& in, const Schema& schema) {
  auto rows = csv::read_all(in);
  if (rows.empty()) throw Error(ErrorCode::EmptyFile, "no header row");
  const auto header = rows.front();
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t j = 0; j < header.size(); ++j) pos[header[j]] = j;

  auto require = [&](const std::string& name) {
    auto it = pos.find(name);
    if (it == pos.end()) throw Error(ErrorCode::MissingColumn, "column '" + name + "' not in header");
    return it->second;
  };

  std::optional<std::size_t> target_col;
  std::optional<std::size_t> date_col;
  if (schema.require_target) {
    target_col = require(schema.target);
    if (!schema.date.empty()) date_col = require(schema.date);
  } else {
    if (pos.contains(schema.target)) target_col = pos.at(schema.target);
    if (!schema.date.empty() && pos.contains(schema.date)) date_col = pos.at(schema.date);
  }

  std::vector<std::pair<std::string, FeatureKind>> wanted;
  if (schema.columns.empty()) {
    for (const auto& h : header) {
      if (h != schema.target && h != schema.date) {
        wanted.emplace_back(h, schema.categorical.contains(h) ? FeatureKind::Categorical : FeatureKind::Numeric);
      }
    }
    for (const auto& name : schema.categorical) require(name);
  } else {
    // Header order, not schema order, so output follows the file.
    for (const auto& name : schema.columns | std::views::keys) require(name);
    for (const auto& h : header) {
      auto it = schema.columns.find(h);
      if (it != schema.columns.end()) wanted.emplace_back(h, it->second);
    }
  }

  Dataset d;
  d.target_name = schema.target;
  d.date_name = schema.date;
  const std::size_t n = rows.size() - 1;
  for (const auto& [name, kind] : wanted) {
    Feature f;
    f.name = name;
    f.kind = kind;
    d.columns.push_back(std::move(f));
  }
  std::vector<std::size_t> src;
  for (const auto& c : d.columns) src.push_back(pos.at(c.name));

  d.target.reserve(n);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size()) {
      throw Error(ErrorCode::InvalidArgument,
                  "line " + std::to_string(r + 1) + " has " + std::to_string(row.size()) + " fields, expected " +
                      std::to_string(header.size()));
    }
    const auto& t = target_col ? row[*target_col] : std::string("0");
    if (t == "0") {
      d.target.push_back(0);
    } else if (t == "1") {
      d.target.push_back(1);
    } else {
      throw Error(ErrorCode::BadTarget, "target '" + schema.target + "' has value '" + t + "' on line " +
                                            std::to_string(r + 1));
    }
    if (date_col) {
      auto dt = Date::parse(row[*date_col]);
      if (!dt) {
        throw Error(ErrorCode::InvalidArgument, "bad date '" + row[*date_col] + "' on line " + std::to_string(r + 1));
      }
      d.obs_date.push_back(*dt);
    }
    for (std::size_t k = 0; k < d.columns.size(); ++k) {
      auto& col = d.columns[k];
      const auto& cell = row[src[k]];
      if (col.kind == FeatureKind::Numeric) {
        col.numeric.push_back(detail::parse_number(cell, schema.missing_token));
      } else if (cell.empty() || cell == schema.missing_token) {
        col.categorical.emplace_back(std::nullopt);
      } else {
        col.categorical.emplace_back(cell);
      }
    }
  }
  if (n == 0) throw Error(ErrorCode::EmptyFile, "no data rows");
  d.validate();
  return d;
}

inline Dataset load_csv(const std::string& path, const Schema& schema) {
  auto in = csv::open_input(path);
  return parse_csv(in, schema);
}

inline void write_csv(std::ostream& out, const Dataset& d, const std::string& missing_token = "NA") {
  csv::Row header;
  for (const auto& c : d.columns) header.push_back(c.name);
  header.push_back(d.target_name);
  if (d.has_dates()) header.push_back(d.date_name.empty() ? "obs_date" : d.date_name);
  csv::write_record(out, header);
  csv::Row row(header.size());
  for (std::size_t i = 0; i < d.n_rows(); ++i) {
    for (std::size_t k = 0; k < d.columns.size(); ++k) {
      const auto& c = d.columns[k];
      if (c.is_missing(i)) {
        row[k] = missing_token;
      } else if (c.kind == FeatureKind::Numeric) {
        row[k] = csv::format_double(*c.numeric[i]);
      } else {
        row[k] = *c.categorical[i];
      }
    }
    row[d.columns.size()] = std::to_string(d.target[i]);
    if (d.has_dates()) row[d.columns.size() + 1] = d.obs_date[i].str();
    csv::write_record(out, row);
  }
}

inline void write_csv(const std::string& path, const Dataset& d, const std::string& missing_token = "NA") {
  auto out = csv::open_output(path);
  write_csv(out, d, missing_token);
}

// ---------------------------------------------------------------------------
// Mean imputation

/// Statistics fitted on training data and replayed on every held-out part.
struct ImputationStats {
  std::map<std::string, double> means;
  std::vector<std::string> dropped;  // numeric columns with no observed value

  bool operator==(const ImputationStats&) const = default;
};

inline void to_json(nlohmann::json& j, const ImputationStats& s) {
  j = nlohmann::json{{"means", s.means}, {"dropped", s.dropped}};
}
inline void from_json(const nlohmann::json& j, ImputationStats& s) {
  j.at("means").get_to(s.means);
  j.at("dropped").get_to(s.dropped);
}

inline ImputationStats fit_imputation(const Dataset& d) {
  ImputationStats s;
  for (const auto& c : d.columns) {
    if (c.kind != FeatureKind::Numeric) continue;
    double sum = 0;
    std::size_t n = 0;
    for (const auto& v : c.numeric) {
      if (v) {
        sum += *v;
        ++n;
      }
    }
    if (n == 0) {
      s.dropped.push_back(c.name);
      warn("column '" + c.name + "' has no observed values; dropped");
    } else {
      s.means[c.name] = sum / static_cast<double>(n);
    }
  }
  return s;
}

/// Fills numeric gaps with the recorded means, categorical gaps with the
/// MISSING level, and removes the recorded all-missing columns.
inline Dataset apply_imputation(const Dataset& d, const ImputationStats& s) {
  Dataset out = d;
  out.columns.clear();
  const std::set<std::string> dropped(s.dropped.begin(), s.dropped.end());
  for (const auto& c : d.columns) {
    if (dropped.count(c.name)) continue;
    Feature f = c;
    if (f.kind == FeatureKind::Numeric) {
      auto it = s.means.find(f.name);
      if (it == s.means.end()) {
        if (f.n_missing() > 0) {
          throw Error(ErrorCode::LeakageGuard, "no fitted mean for column '" + f.name + "'");
        }
      } else {
        for (auto& v : f.numeric) {
          if (!v) v = it->second;
        }
      }
    } else {
      for (auto& v : f.categorical) {
        if (!v) v = kMissingLevel;
      }
    }
    out.columns.push_back(std::move(f));
  }
  return out;
}

inline Dataset impute_mean(const Dataset& d, ImputationStats* fitted = nullptr) {
  auto s = fit_imputation(d);
  auto out = apply_imputation(d, s);
  if (fitted) *fitted = std::move(s);
  return out;
}

// ---------------------------------------------------------------------------
// Dummy encoding

/// k-1 indicator mapping for one categorical column. The most frequent level
/// (ties broken by name) is the dropped reference.
struct DummyEncoding {
  std::string column;
  std::string reference;
  std::vector<std::string> levels;  // one indicator per entry, sorted

  std::string indicator_name(const std::string& level) const { return column + "=" + level; }

  bool operator==(const DummyEncoding&) const = default;
};

inline void to_json(nlohmann::json& j, const DummyEncoding& e) {
  j = nlohmann::json{{"column", e.column}, {"reference", e.reference}, {"levels", e.levels}};
}
inline void from_json(const nlohmann::json& j, DummyEncoding& e) {
  j.at("column").get_to(e.column);
  j.at("reference").get_to(e.reference);
  j.at("levels").get_to(e.levels);
}

inline DummyEncoding fit_dummy(const Feature& f) {
  if (f.kind != FeatureKind::Categorical) {
    throw Error(ErrorCode::InvalidArgument, "column '" + f.name + "' is not categorical");
  }
  std::map<std::string, std::size_t> counts;
  for (const auto& v : f.categorical) ++counts[v ? *v : kMissingLevel];
  DummyEncoding e;
  e.column = f.name;
  std::size_t best = 0;
  for (const auto& [level, n] : counts) {
    if (n > best) {
      best = n;
      e.reference = level;
    }
  }
  for (const auto& level : counts | std::views::keys) {
    if (level != e.reference) e.levels.push_back(level);
  }
  return e;
}

/// Replaces each encoded column in place with its indicator columns. Levels
/// not seen at fit time encode as all zeros.
inline Dataset apply_dummies(const Dataset& d, const std::vector<DummyEncoding>& encodings) {
  std::map<std::string, const DummyEncoding*> by_col;
  for (const auto& e : encodings) {
    d.column(e.column);
    by_col[e.column] = &e;
  }
  Dataset out = d;
  out.columns.clear();
  for (const auto& c : d.columns) {
    auto it = by_col.find(c.name);
    if (it == by_col.end()) {
      out.columns.push_back(c);
      continue;
    }
    if (c.kind != FeatureKind::Categorical) {
      throw Error(ErrorCode::InvalidArgument, "column '" + c.name + "' is not categorical");
    }
    const auto& e = *it->second;
    for (const auto& level : e.levels) {
      std::vector<std::optional<double>> ind(c.size());
      for (std::size_t i = 0; i < c.size(); ++i) {
        const auto& v = c.categorical[i];
        ind[i] = (v ? *v : kMissingLevel) == level ? 1.0 : 0.0;
      }
      out.columns.push_back(Feature::make_numeric(e.indicator_name(level), std::move(ind)));
    }
  }
  out.validate();
  return out;
}

inline Dataset dummy_encode(const Dataset& d, const std::vector<std::string>& cols,
                            std::vector<DummyEncoding>* fitted = nullptr) {
  std::vector<DummyEncoding> enc;
  for (const auto& name : cols) {
    if (d.find(name) < 0) throw Error(ErrorCode::UnknownColumn, "no column '" + name + "' to encode");
    enc.push_back(fit_dummy(d.column(name)));
  }
  auto out = apply_dummies(d, enc);
  if (fitted) *fitted = std::move(enc);
  return out;
}

/// Imputation and encoding fitted once on the training part. Applying it
/// before fit() is a leakage error.
class Preprocessor {
 public:
  void fit(const Dataset& train, const std::vector<std::string>& dummy_columns) {
    imputation_ = fit_imputation(train);
    const auto imputed = apply_imputation(train, imputation_);
    encodings_.clear();
    for (const auto& name : dummy_columns) {
      if (imputed.find(name) < 0) throw Error(ErrorCode::UnknownColumn, "no column '" + name + "' to encode");
      encodings_.push_back(fit_dummy(imputed.column(name)));
    }
    fitted_ = true;
  }

  Dataset apply(const Dataset& d) const {
    if (!fitted_) throw Error(ErrorCode::LeakageGuard, "preprocessor applied before it was fitted");
    return apply_dummies(apply_imputation(d, imputation_), encodings_);
  }

  bool fitted() const { return fitted_; }
  const ImputationStats& imputation() const { return imputation_; }
  const std::vector<DummyEncoding>& encodings() const { return encodings_; }

  nlohmann::json to_json() const {
    return nlohmann::json{{"imputation", imputation_}, {"encodings", encodings_}};
  }

  static Preprocessor from_json(const nlohmann::json& j) {
    Preprocessor p;
    j.at("imputation").get_to(p.imputation_);
    j.at("encodings").get_to(p.encodings_);
    p.fitted_ = true;
    return p;
  }

 private:
  ImputationStats imputation_;
  std::vector<DummyEncoding> encodings_;
  bool fitted_ = false;
};

// ---------------------------------------------------------------------------
// Temporal split

struct SplitParams {
  double test_fraction = 0.3;
  double oos_fraction = 0.2;
  Date oot_start = Date::from_ymd(2018, 8, 31);
  Date oot_end = Date::from_ymd(2018, 11, 30);
  std::uint64_t seed = 1;
};

/// Row indices (into the source dataset) of each part. Rows dated after
/// oot_end fall outside the modelling window and are listed in `excluded`.
struct SplitIndices {
  std::vector<std::size_t> train, test, out_of_sample, out_of_time, excluded;
};

struct SplitSet {
  Dataset train, test, out_of_sample, out_of_time;
};

inline SplitIndices temporal_split_indices(const Dataset& d, const SplitParams& p) {
  if (!d.has_dates()) throw Error(ErrorCode::InvalidArgument, "temporal split needs an observation date column");
  if (!(p.oot_start < p.oot_end)) throw Error(ErrorCode::InvalidArgument, "oot_start must precede oot_end");
  if (p.test_fraction <= 0 || p.test_fraction >= 1 || p.oos_fraction < 0 || p.oos_fraction >= 1) {
    throw Error(ErrorCode::InvalidArgument, "fractions must lie in (0,1)");
  }
  SplitIndices s;
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < d.n_rows(); ++i) {
    const Date t = d.obs_date[i];
    if (t > p.oot_end) {
      s.excluded.push_back(i);
    } else if (t > p.oot_start) {
      s.out_of_time.push_back(i);
    } else {
      pool.push_back(i);
    }
  }
  Rng oos_rng(p.seed, 0);
  oos_rng.shuffle(pool);
  const auto n_oos = static_cast<std::size_t>(std::llround(p.oos_fraction * static_cast<double>(pool.size())));
  s.out_of_sample.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_oos));
  std::vector<std::size_t> rest(pool.begin() + static_cast<std::ptrdiff_t>(n_oos), pool.end());
  std::sort(rest.begin(), rest.end());
  Rng test_rng(p.seed, 1);
  test_rng.shuffle(rest);
  const auto n_test = static_cast<std::size_t>(std::llround(p.test_fraction * static_cast<double>(rest.size())));
  s.test.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_test));
  s.train.assign(rest.begin() + static_cast<std::ptrdiff_t>(n_test), rest.end());
  for (auto* part : {&s.train, &s.test, &s.out_of_sample, &s.out_of_time}) std::sort(part->begin(), part->end());

  const std::pair<const char*, const std::vector<std::size_t>*> parts[] = {
      {"train", &s.train}, {"test", &s.test}, {"out_of_sample", &s.out_of_sample}, {"out_of_time", &s.out_of_time}};
  for (const auto& [name, idx] : parts) {
    if (idx->empty()) throw Error(ErrorCode::EmptyPartition, std::string(name) + " partition is empty");
  }
  return s;
}

inline SplitSet temporal_split(const Dataset& d, const SplitParams& p, SplitIndices* indices = nullptr) {
  auto idx = temporal_split_indices(d, p);
  if (!idx.excluded.empty()) {
    warn(std::to_string(idx.excluded.size()) + " rows dated after " + p.oot_end.str() + " excluded");
  }
  SplitSet s{d.take_rows(idx.train), d.take_rows(idx.test), d.take_rows(idx.out_of_sample),
             d.take_rows(idx.out_of_time)};
  if (indices) *indices = std::move(idx);
  return s;
}

}  // namespace cxai
