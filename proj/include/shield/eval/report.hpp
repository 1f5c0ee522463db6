#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "shield/common.hpp"

namespace shield::eval {

struct ReportRow {
  std::string setting;
  std::string corpus;
  std::string metric;
  double value = 0.0;
  std::size_t n = 0;
};

// Rows plus free-form metadata (seeds, config hash, timestamp). Only the rows
// form the report body; metadata goes to the JSON sidecar.
struct EvalReport {
  std::string kind;
  std::vector<ReportRow> rows;
  std::map<std::string, std::string> metadata;

  void add(std::string setting, std::string corpus, std::string metric, double value, std::size_t n) {
    rows.push_back({std::move(setting), std::move(corpus), std::move(metric), value, n});
  }

  void sort_rows() {
    std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
      return std::tie(a.setting, a.corpus, a.metric) < std::tie(b.setting, b.corpus, b.metric);
    });
  }

  const ReportRow* find(const std::string& setting, const std::string& corpus, const std::string& metric) const {
    for (const auto& r : rows)
      if (r.setting == setting && r.corpus == corpus && r.metric == metric) return &r;
    return nullptr;
  }

  double value(const std::string& setting, const std::string& corpus, const std::string& metric) const {
    const auto* r = find(setting, corpus, metric);
    if (!r) throw invalid_input("report has no row (" + setting + ", " + corpus + ", " + metric + ")");
    return r->value;
  }
};

inline bool is_rate_metric(const std::string& metric) {
  return metric.rfind("acc", 0) == 0 || metric.rfind("recall", 0) == 0;
}

inline void check_report(const EvalReport& r) {
  for (const auto& row : r.rows) {
    if (!std::isfinite(row.value)) throw invariant_violation("non-finite report value in " + row.setting + "/" + row.metric);
    if (is_rate_metric(row.metric) && (row.value < 0.0 || row.value > 1.0))
      throw invariant_violation("rate outside [0,1] in " + row.setting + "/" + row.metric);
  }
}

// %.17g keeps values round-trippable so reruns compare byte for byte.
inline std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string report_csv(const EvalReport& r) {
  std::ostringstream os;
  os << "setting,corpus,metric,value,n\n";
  for (const auto& row : r.rows)
    os << row.setting << ',' << row.corpus << ',' << row.metric << ',' << format_value(row.value) << ',' << row.n << '\n';
  return os.str();
}

inline std::string report_table(const EvalReport& r) {
  std::size_t ws = 7, wc = 6, wm = 6;
  for (const auto& row : r.rows) {
    ws = std::max(ws, row.setting.size());
    wc = std::max(wc, row.corpus.size());
    wm = std::max(wm, row.metric.size());
  }
  std::ostringstream os;
  char line[512];
  std::snprintf(line, sizeof line, "%-*s  %-*s  %-*s  %10s  %6s\n", static_cast<int>(ws), "setting", static_cast<int>(wc),
                "corpus", static_cast<int>(wm), "metric", "value", "n");
  os << line;
  for (const auto& row : r.rows) {
    std::snprintf(line, sizeof line, "%-*s  %-*s  %-*s  %10.4f  %6zu\n", static_cast<int>(ws), row.setting.c_str(),
                  static_cast<int>(wc), row.corpus.c_str(), static_cast<int>(wm), row.metric.c_str(), row.value, row.n);
    os << line;
  }
  return os.str();
}

inline double mean_of(const std::vector<double>& v) {
  require(!v.empty(), "mean of empty set");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

struct ClassCounts {
  std::size_t real_total = 0, real_correct = 0;
  std::size_t other_total = 0, other_correct = 0;

  void add(bool is_real, bool said_real) {
    if (is_real) {
      ++real_total;
      real_correct += said_real ? 1 : 0;
    } else {
      ++other_total;
      other_correct += said_real ? 0 : 1;
    }
  }
  std::size_t total() const { return real_total + other_total; }
  double joint() const { return ratio(real_correct + other_correct, total()); }
  double recall_real() const { return ratio(real_correct, real_total); }
  double recall_other() const { return ratio(other_correct, other_total); }

  static double ratio(std::size_t a, std::size_t b) {
    if (b == 0) throw invalid_input("accuracy over an empty set");
    return static_cast<double>(a) / static_cast<double>(b);
  }
};

}  // namespace shield::eval
