#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cmnrec/data.hpp"
#include "cmnrec/model.hpp"

namespace cmnrec {

struct MetricReport {
  std::size_t top_n = 5;
  double mrr = 0, hr = 0, ndcg = 0;
  std::size_t count = 0;  // sequences evaluated
};

/// 1-based rank of the target among scores for ids 1..I: 1 + the number of
/// items scoring strictly higher, plus ties (broken against the target).
std::size_t rank_of_target(const std::vector<double>& scores, std::size_t target_id);

struct MetricContribution {
  double mrr = 0, hr = 0, ndcg = 0;
};

/// (1/rank, 1, 1/log2(rank+1)) when rank <= top_n, zeros otherwise.
MetricContribution metrics_at_n(std::size_t rank, std::size_t top_n);

/// Last-position protocol: for each sequence the target is the final item and
/// the context is everything before it. Reports the mean contribution.
MetricReport evaluate(const Model& model, const std::vector<ItemSequence>& sequences,
                      std::size_t top_n);

/// Item occurrence counts over the non-padding entries, as static scores for
/// ids 1..I (the popularity baseline).
std::vector<double> popularity_scores(const std::vector<ItemSequence>& sequences,
                                      std::size_t item_count);

/// Evaluates a fixed score vector under the same last-position protocol.
MetricReport evaluate_scores(const std::vector<double>& scores,
                             const std::vector<ItemSequence>& sequences, std::size_t top_n);

std::string report_json(const MetricReport& report);
std::string report_csv_header();
std::string report_csv_row(const std::string& label, const MetricReport& report);

}  // namespace cmnrec
