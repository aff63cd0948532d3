#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mmr/numeric.hpp"
#include "mmr/rng.hpp"

namespace mmr {

enum class PolicyKind { mms, random, hard_negative, entropy };

std::string to_string(PolicyKind k);
PolicyKind policy_from_string(const std::string& s);

struct SelectionPolicy {
  PolicyKind kind = PolicyKind::mms;
  std::size_t pool_size = 640;  // B
  std::size_t batch_size = 64;  // b

  /// Throws unless 1 ≤ b ≤ B.
  void validate() const;
};

struct CriterionStats {
  std::size_t count = 0;
  std::size_t sentinels = 0;  // infinite values, excluded from mean/min/max
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct SelectionResult {
  std::vector<std::size_t> chosen;  // ascending
  std::vector<double> criterion;    // one per pool sample; empty for random
  CriterionStats chosen_stats;
  CriterionStats rejected_stats;
};

/// The b smallest distances; lowest index first among ties, so infinite
/// sentinels go last.
SelectionResult select_mms(std::span<const double> distances, std::size_t b);

/// The b largest per-sample losses (lowest index on ties).
SelectionResult select_hard_negative(std::span<const double> losses, std::size_t b);

/// The b rows with the largest softmax entropy (lowest index on ties).
SelectionResult select_entropy(const Matrix& scores, std::size_t b);

/// Uniform b-subset of [0, B) without replacement (partial Fisher–Yates).
SelectionResult select_random(std::size_t pool, std::size_t b, Rng& rng);

/// Shannon entropy (nats) of softmax(scores).
double softmax_entropy(std::span<const double> scores);

}  // namespace mmr
