#include "mmr/margin.hpp"

#include <algorithm>
#include <cmath>

namespace mmr {

namespace {

double weight_gap_norm(const LinearHead& head, ClassIndex p, ClassIndex q) {
  const auto wp = head.weight.row(p);
  const auto wq = head.weight.row(q);
  double acc = 0.0;
  for (std::size_t k = 0; k < wp.size(); ++k) {
    const double d = wp[k] - wq[k];
    acc += d * d;
  }
  return std::sqrt(acc);
}

/// gap / norm, with the degenerate-pair convention applied.
double guarded_distance(double gap, double norm) {
  if (norm > kDegenerateNorm) return gap / norm;
  if (std::abs(gap) <= kDegenerateNorm) return 0.0;
  return gap > 0.0 ? kNoBoundary : -kNoBoundary;
}

MarginEntry entry_from_scores(const LinearHead& head, std::span<const double> s,
                              const ClassIndex* label) {
  MarginEntry e;
  ClassIndex top = 0;
  for (std::size_t j = 1; j < s.size(); ++j)
    if (s[j] > s[top]) top = j;
  const ClassIndex runner = competitive_class(s, top);
  e.top_class = top;
  e.runner_up = runner;
  e.mms = guarded_distance(s[top] - s[runner], weight_gap_norm(head, top, runner));
  if (label != nullptr) {
    const ClassIndex y = *label;
    const ClassIndex m = competitive_class(s, y);
    e.true_margin = guarded_distance(s[y] - s[m], weight_gap_norm(head, y, m));
  }
  return e;
}

void check_labels(const Matrix& rows, std::span<const ClassIndex> labels, std::size_t n) {
  if (!labels.empty() && labels.size() != rows.rows()) {
    throw DimensionError("score_batch: label count does not match batch size");
  }
  for (auto y : labels)
    if (y >= n) throw Error("score_batch: label out of range");
}

}  // namespace

PairBoundary PairBoundary::between(const LinearHead& head, ClassIndex p, ClassIndex q) {
  if (p == q) throw Error("PairBoundary: p and q must differ");
  if (p >= head.n_classes() || q >= head.n_classes()) throw Error("PairBoundary: class out of range");
  PairBoundary b;
  b.p = p;
  b.q = q;
  const auto wp = head.weight.row(p);
  const auto wq = head.weight.row(q);
  b.w_diff.resize(wp.size());
  for (std::size_t k = 0; k < wp.size(); ++k) b.w_diff[k] = wp[k] - wq[k];
  b.b_diff = head.bias[p] - head.bias[q];
  return b;
}

double pair_distance(const PairBoundary& boundary, std::span<const double> x) {
  const double norm = l2_norm(boundary.w_diff);
  if (norm <= kDegenerateNorm) {
    throw DegenerateBoundary("pair_distance: classes " + std::to_string(boundary.p) + " and " +
                             std::to_string(boundary.q) + " have identical weight vectors");
  }
  return (dot(boundary.w_diff, x) + boundary.b_diff) / norm;
}

ClassIndex competitive_class(std::span<const double> scores, ClassIndex y) {
  if (scores.size() < 2) throw Error("competitive_class: need at least 2 scores");
  if (y >= scores.size()) throw Error("competitive_class: label out of range");
  ClassIndex best = y == 0 ? 1 : 0;
  for (std::size_t j = best + 1; j < scores.size(); ++j)
    if (j != y && scores[j] > scores[best]) best = j;
  return best;
}

double true_margin(const LinearHead& head, std::span<const double> phi, ClassIndex y) {
  const auto s = head.scores(phi);
  return pair_distance(PairBoundary::between(head, y, competitive_class(s, y)), phi);
}

MarginEntry mms_from_scores(const LinearHead& head, std::span<const double> scores) {
  if (scores.size() != head.n_classes()) throw DimensionError("mms: score length mismatch");
  if (scores.size() < 2) throw Error("mms: need at least 2 classes");
  return entry_from_scores(head, scores, nullptr);
}

MarginEntry mms(const LinearHead& head, std::span<const double> phi) {
  const auto s = head.scores(phi);
  return mms_from_scores(head, s);
}

std::vector<MarginEntry> score_batch_from_scores(const LinearHead& head, const Matrix& scores,
                                                 std::span<const ClassIndex> labels) {
  if (scores.cols() != head.n_classes()) throw DimensionError("score_batch: score width mismatch");
  check_labels(scores, labels, head.n_classes());
  std::vector<MarginEntry> out(scores.rows());
  const auto n = static_cast<std::ptrdiff_t>(scores.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < n; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    out[i] = entry_from_scores(head, scores.row(i), labels.empty() ? nullptr : &labels[i]);
  }
  return out;
}

std::vector<MarginEntry> score_batch(const LinearHead& head, const Matrix& features,
                                     std::span<const ClassIndex> labels) {
  return score_batch_from_scores(head, head_scores(head, features), labels);
}

std::vector<MarginEntry> score_batch_reference(const LinearHead& head, const Matrix& features,
                                               std::span<const ClassIndex> labels) {
  check_labels(features, labels, head.n_classes());
  std::vector<MarginEntry> out;
  out.reserve(features.rows());
  for (std::size_t i = 0; i < features.rows(); ++i) {
    const auto s = head.scores(features.row(i));
    out.push_back(entry_from_scores(head, s, labels.empty() ? nullptr : &labels[i]));
  }
  return out;
}

std::vector<double> mms_values(std::span<const MarginEntry> entries) {
  std::vector<double> d;
  d.reserve(entries.size());
  for (const auto& e : entries) d.push_back(e.mms);
  return d;
}

double phi_max_norm(const Matrix& features) {
  return l2_norm(features.row(phi_max_row(features)));
}

std::size_t phi_max_row(const Matrix& features) {
  if (features.rows() == 0) throw Error("phi_max_norm: empty batch");
  const auto norms = row_l2_norms(features);
  return static_cast<std::size_t>(std::max_element(norms.begin(), norms.end()) - norms.begin());
}

MmsSummary summarize_mms(std::span<const MarginEntry> entries) {
  MmsSummary s;
  s.count = entries.size();
  std::vector<double> finite;
  for (const auto& e : entries) {
    if (std::isinf(e.mms)) {
      ++s.sentinels;
    } else {
      finite.push_back(e.mms);
    }
  }
  if (finite.empty()) return s;
  std::sort(finite.begin(), finite.end());
  s.min = finite.front();
  s.max = finite.back();
  const std::size_t mid = finite.size() / 2;
  s.median = finite.size() % 2 == 1 ? finite[mid] : 0.5 * (finite[mid - 1] + finite[mid]);
  double sum = 0.0;
  for (double v : finite) sum += v;
  s.mean = sum / static_cast<double>(finite.size());
  return s;
}

}  // namespace mmr
