#include "mmr/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mmr {

namespace {

void check_size(std::size_t pool, std::size_t b) {
  if (b > pool) {
    throw Error("selection: cannot choose " + std::to_string(b) + " of " + std::to_string(pool) +
                " samples");
  }
}

CriterionStats stats_of(std::span<const double> criterion, std::span<const std::size_t> idx) {
  CriterionStats s;
  s.count = idx.size();
  bool any = false;
  double sum = 0.0;
  std::size_t finite = 0;
  for (auto i : idx) {
    const double v = criterion[i];
    if (!std::isfinite(v)) {
      ++s.sentinels;
      continue;
    }
    sum += v;
    ++finite;
    s.min = any ? std::min(s.min, v) : v;
    s.max = any ? std::max(s.max, v) : v;
    any = true;
  }
  s.mean = finite > 0 ? sum / static_cast<double>(finite) : 0.0;
  return s;
}

/// Chooses b indices, preferring smaller keys (`ascending`) or larger ones,
/// with lower indices first among equal keys.
SelectionResult select_by(std::vector<double> criterion, std::size_t b, bool ascending) {
  check_size(criterion.size(), b);
  std::vector<std::size_t> order(criterion.size());
  std::iota(order.begin(), order.end(), 0);
  const auto better = [&](std::size_t l, std::size_t r) {
    const double a = criterion[l];
    const double c = criterion[r];
    if (a != c) return ascending ? a < c : a > c;
    return l < r;
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(b), order.end(), better);

  SelectionResult r;
  r.chosen.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(b));
  std::vector<std::size_t> rejected(order.begin() + static_cast<std::ptrdiff_t>(b), order.end());
  std::sort(r.chosen.begin(), r.chosen.end());
  std::sort(rejected.begin(), rejected.end());
  r.chosen_stats = stats_of(criterion, r.chosen);
  r.rejected_stats = stats_of(criterion, rejected);
  r.criterion = std::move(criterion);
  return r;
}

void reject_nan(std::span<const double> v, const char* what) {
  for (double x : v)
    if (std::isnan(x)) throw Error(std::string(what) + ": NaN criterion value");
}

}  // namespace

std::string to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::mms: return "mms";
    case PolicyKind::random: return "random";
    case PolicyKind::hard_negative: return "hard_negative";
    case PolicyKind::entropy: return "entropy";
  }
  return "?";
}

PolicyKind policy_from_string(const std::string& s) {
  if (s == "mms") return PolicyKind::mms;
  if (s == "random") return PolicyKind::random;
  if (s == "hard_negative" || s == "hard-negative" || s == "nm") return PolicyKind::hard_negative;
  if (s == "entropy") return PolicyKind::entropy;
  throw Error("unknown selection policy '" + s + "'");
}

void SelectionPolicy::validate() const {
  if (batch_size < 1) throw Error("policy: batch_size must be at least 1");
  if (batch_size > pool_size) {
    throw Error("policy: batch_size (" + std::to_string(batch_size) + ") exceeds pool_size (" +
                std::to_string(pool_size) + ")");
  }
}

SelectionResult select_mms(std::span<const double> distances, std::size_t b) {
  reject_nan(distances, "select_mms");
  return select_by({distances.begin(), distances.end()}, b, true);
}

SelectionResult select_hard_negative(std::span<const double> losses, std::size_t b) {
  reject_nan(losses, "select_hard_negative");
  return select_by({losses.begin(), losses.end()}, b, false);
}

double softmax_entropy(std::span<const double> scores) {
  std::vector<double> p(scores.size());
  softmax(scores, p);
  double h = 0.0;
  for (double q : p)
    if (q > 0.0) h -= q * std::log(q);
  return h;
}

SelectionResult select_entropy(const Matrix& scores, std::size_t b) {
  std::vector<double> h(scores.rows());
  for (std::size_t i = 0; i < scores.rows(); ++i) h[i] = softmax_entropy(scores.row(i));
  return select_by(std::move(h), b, false);
}

SelectionResult select_random(std::size_t pool, std::size_t b, Rng& rng) {
  check_size(pool, b);
  SelectionResult r;
  if (b == pool) {
    r.chosen.resize(pool);
    std::iota(r.chosen.begin(), r.chosen.end(), 0);
  } else {
    std::vector<std::size_t> perm(pool);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = 0; i < b; ++i) std::swap(perm[i], perm[i + rng.below(pool - i)]);
    r.chosen.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(b));
    std::sort(r.chosen.begin(), r.chosen.end());
  }
  r.chosen_stats.count = b;
  r.rejected_stats.count = pool - b;
  return r;
}

}  // namespace mmr
