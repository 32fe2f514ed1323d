#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cmnrec/controller.hpp"
#include "cmnrec/data.hpp"
#include "cmnrec/model.hpp"

namespace cmnrec {

/// u.v / (|u||v| + 1e-12); zero vectors give 0 by convention.
double cosine(const std::vector<double>& u, const std::vector<double>& v);

/// Per-position mean cosine between the item embedding at position i and the
/// embedding of the sequence's last (target) item, over positions 1..T-1.
/// Padding entries are skipped; a position nobody occupies has count 0.
struct CorrelationProfile {
  std::vector<std::size_t> positions;    // 1-based
  std::vector<double> mean_cosine;
  std::vector<std::size_t> counts;
};

CorrelationProfile position_correlation_profile(const EmbeddingTable& table,
                                                const std::vector<ItemSequence>& sequences);

/// How the scalarized last prediction-step hidden state is reduced before
/// taking gradients.
enum class Scalarize { kSum, kMaxComponent };

/// input_contribution[i] = ||d s / d v_{i+1}|| and
/// hidden_contribution[i] = ||d s / d h_{i+1}|| for steps 1..T-1, where s is
/// the scalarized hidden state at the last prediction step (T-1).
struct ContributionSeries {
  std::vector<double> input_contribution;   // q
  std::vector<double> hidden_contribution;  // p
};

ContributionSeries contribution_norms(const Model& model, const ItemSequence& sequence,
                                      Scalarize mode = Scalarize::kSum);

/// position,mean_cosine,count (positions with count 0 omitted)
void write_profile_csv(const std::string& path, const CorrelationProfile& profile);
/// position,input_contribution,hidden_contribution
void write_contributions_csv(const std::string& path, const ContributionSeries& series);

}  // namespace cmnrec
