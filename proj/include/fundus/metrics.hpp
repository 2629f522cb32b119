#pragma once

#include <algorithm>
#include <cstdint>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "fundus/error.hpp"

namespace fundus {

/// K x K count table. Rows are the predicted class, columns the true class.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int k) : k_(k), counts_(static_cast<std::size_t>(k) * k, 0) {
    if (k < 2) throw Error(ErrorCode::InvalidParameter, "a confusion matrix needs at least 2 classes");
  }

  /// Builds from nested rows (rows = predicted). Total must be positive.
  static ConfusionMatrix from_rows(const std::vector<std::vector<std::int64_t>>& rows) {
    ConfusionMatrix cm(static_cast<int>(rows.size()));
    for (std::size_t p = 0; p < rows.size(); ++p) {
      if (rows[p].size() != rows.size()) throw Error(ErrorCode::DimensionMismatch, "confusion matrix must be square");
      for (std::size_t t = 0; t < rows.size(); ++t) {
        if (rows[p][t] < 0) throw Error(ErrorCode::InvalidParameter, "negative count");
        cm.at(static_cast<int>(p), static_cast<int>(t)) = rows[p][t];
      }
    }
    if (cm.total() == 0) throw Error(ErrorCode::EmptyInput, "confusion matrix total must be > 0");
    return cm;
  }

  int k() const noexcept { return k_; }
  std::int64_t& at(int predicted, int truth) noexcept {
    return counts_[static_cast<std::size_t>(predicted) * k_ + truth];
  }
  std::int64_t at(int predicted, int truth) const noexcept {
    return counts_[static_cast<std::size_t>(predicted) * k_ + truth];
  }

  std::int64_t total() const noexcept { return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0}); }
  std::int64_t trace() const noexcept {
    std::int64_t s = 0;
    for (int c = 0; c < k_; ++c) s += at(c, c);
    return s;
  }
  std::int64_t row_sum(int predicted) const noexcept {
    std::int64_t s = 0;
    for (int t = 0; t < k_; ++t) s += at(predicted, t);
    return s;
  }
  std::int64_t col_sum(int truth) const noexcept {
    std::int64_t s = 0;
    for (int p = 0; p < k_; ++p) s += at(p, truth);
    return s;
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  int k_;
  std::vector<std::int64_t> counts_;
};

inline ConfusionMatrix build_cm(const std::vector<int>& predicted, const std::vector<int>& truth, int k) {
  if (predicted.size() != truth.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(predicted.size()) + " predictions vs " +
                                               std::to_string(truth.size()) + " labels");
  }
  if (predicted.empty()) throw Error(ErrorCode::EmptyInput, "no samples");
  ConfusionMatrix cm(k);
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const int p = predicted[i], t = truth[i];
    if (p < 0 || p >= k || t < 0 || t >= k) {
      throw Error(ErrorCode::ClassOutOfRange, "sample " + std::to_string(i) + " has class outside [0," +
                                                  std::to_string(k) + ")");
    }
    ++cm.at(p, t);
  }
  return cm;
}

struct ClassMetrics {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;  // one-vs-rest (TP + TN) / total
  bool degenerate = false;  // some ratio had a zero denominator and was reported as 0
};

struct AggregateMetrics {
  double sensitivity = 0.0;
  double specificity = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;  // overall: trace / total
  double kappa = 0.0;
  bool kappa_degenerate = false;
};

struct MetricReport {
  std::vector<ClassMetrics> per_class;
  AggregateMetrics macro;
  /// Binary tasks only: the positive class (index 1) as a summary row.
  AggregateMetrics positive;
  bool binary = false;

  /// Headline row: positive class for binary tasks, macro average otherwise.
  const AggregateMetrics& summary() const noexcept { return binary ? positive : macro; }
};

namespace detail {
inline double ratio(std::int64_t num, std::int64_t den, bool& degenerate) {
  if (den == 0) {
    degenerate = true;
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}
}  // namespace detail

/// One-vs-rest metrics per class, macro averages, overall accuracy and
/// Cohen's kappa from the row/column marginals.
inline MetricReport metrics(const ConfusionMatrix& cm) {
  const std::int64_t total = cm.total();
  if (total <= 0) throw Error(ErrorCode::EmptyInput, "confusion matrix total must be > 0");
  MetricReport r;
  r.binary = cm.k() == 2;
  for (int c = 0; c < cm.k(); ++c) {
    ClassMetrics m;
    m.tp = cm.at(c, c);
    m.fp = cm.row_sum(c) - m.tp;
    m.fn = cm.col_sum(c) - m.tp;
    m.tn = total - m.tp - m.fp - m.fn;
    m.sensitivity = detail::ratio(m.tp, m.tp + m.fn, m.degenerate);
    m.specificity = detail::ratio(m.tn, m.tn + m.fp, m.degenerate);
    m.precision = detail::ratio(m.tp, m.tp + m.fp, m.degenerate);
    const double pr = m.precision + m.sensitivity;
    m.f1 = pr > 0.0 ? 2.0 * m.precision * m.sensitivity / pr : 0.0;
    m.accuracy = static_cast<double>(m.tp + m.tn) / static_cast<double>(total);
    r.per_class.push_back(m);
  }

  const double n = static_cast<double>(total);
  const double p_o = static_cast<double>(cm.trace()) / n;
  double p_e = 0.0;
  for (int c = 0; c < cm.k(); ++c) {
    p_e += (static_cast<double>(cm.row_sum(c)) / n) * (static_cast<double>(cm.col_sum(c)) / n);
  }
  double kappa = 0.0;
  bool kappa_degenerate = false;
  if (p_e >= 1.0) {
    // All mass in one cell: agreement is perfect but chance agreement is too.
    kappa = p_o >= 1.0 ? 1.0 : 0.0;
    kappa_degenerate = true;
  } else {
    kappa = (p_o - p_e) / (1.0 - p_e);
  }

  AggregateMetrics& a = r.macro;
  for (const auto& m : r.per_class) {
    a.sensitivity += m.sensitivity;
    a.specificity += m.specificity;
    a.precision += m.precision;
    a.f1 += m.f1;
  }
  const double k = static_cast<double>(cm.k());
  a.sensitivity /= k;
  a.specificity /= k;
  a.precision /= k;
  a.f1 /= k;
  a.accuracy = p_o;
  a.kappa = kappa;
  a.kappa_degenerate = kappa_degenerate;

  if (r.binary) {
    const ClassMetrics& pos = r.per_class[1];
    r.positive = {pos.sensitivity, pos.specificity, pos.precision, pos.f1, p_o, kappa, kappa_degenerate};
  }
  return r;
}

inline std::vector<std::string> default_class_names(int k) {
  std::vector<std::string> names;
  for (int c = 0; c < k; ++c) names.push_back("class" + std::to_string(c));
  return names;
}

struct TableRows {
  std::string csv;
  std::string text;
};

namespace detail {
inline std::string fmt4(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << v;
  return os.str();
}
}  // namespace detail

/// Renders reports side by side.
///
/// CSV: `method,class,sensitivity,specificity,precision,f1,accuracy`, one
/// row per class, followed by a `macro` row per method and, for binary
/// reports, a `positive` row. Text: one aligned row per method with the
/// headline metrics including kappa.
inline TableRows report_table(const std::vector<MetricReport>& reports, const std::vector<std::string>& methods,
                              const std::vector<std::string>& class_names = {}) {
  if (reports.size() != methods.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(reports.size()) + " reports vs " +
                                               std::to_string(methods.size()) + " method names");
  }
  std::ostringstream csv;
  csv << "method,class,sensitivity,specificity,precision,f1,accuracy\n";
  auto agg_row = [&](const std::string& method, const char* label, const AggregateMetrics& a) {
    csv << method << ',' << label << ',' << detail::fmt4(a.sensitivity) << ',' << detail::fmt4(a.specificity)
        << ',' << detail::fmt4(a.precision) << ',' << detail::fmt4(a.f1) << ',' << detail::fmt4(a.accuracy)
        << '\n';
  };
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    const auto names = class_names.size() == r.per_class.size()
                           ? class_names
                           : default_class_names(static_cast<int>(r.per_class.size()));
    for (std::size_t c = 0; c < r.per_class.size(); ++c) {
      const auto& m = r.per_class[c];
      csv << methods[i] << ',' << names[c] << ',' << detail::fmt4(m.sensitivity) << ','
          << detail::fmt4(m.specificity) << ',' << detail::fmt4(m.precision) << ',' << detail::fmt4(m.f1) << ','
          << detail::fmt4(m.accuracy) << '\n';
    }
    agg_row(methods[i], "macro", r.macro);
    if (r.binary) agg_row(methods[i], "positive", r.positive);
  }

  std::size_t width = 7;
  for (const auto& m : methods) width = std::max(width, m.size());
  std::ostringstream text;
  const char* cols[] = {"Sensitivity", "Specificity", "Precision", "F1", "Kappa", "Accuracy"};
  text << std::left << std::setw(static_cast<int>(width)) << "Method";
  for (const char* c : cols) text << "  " << std::right << std::setw(11) << c;
  text << '\n';
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& a = reports[i].summary();
    text << std::left << std::setw(static_cast<int>(width)) << methods[i];
    for (double v : {a.sensitivity, a.specificity, a.precision, a.f1, a.kappa, a.accuracy}) {
      text << "  " << std::right << std::setw(11) << detail::fmt4(v);
    }
    text << '\n';
  }
  return {csv.str(), text.str()};
}

}  // namespace fundus
