#include "cmnrec/eval.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace cmnrec {

std::size_t rank_of_target(const std::vector<double>& scores, std::size_t target_id) {
  if (target_id == 0 || target_id > scores.size())
    throw std::invalid_argument("rank_of_target: target id " + std::to_string(target_id) +
                                " outside 1.." + std::to_string(scores.size()));
  double target_score = scores[target_id - 1];
  std::size_t rank = 1;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (i + 1 == target_id) continue;
    if (scores[i] >= target_score) ++rank;  // ties count against the target
  }
  return rank;
}

MetricContribution metrics_at_n(std::size_t rank, std::size_t top_n) {
  if (rank == 0 || top_n == 0)
    throw std::invalid_argument("metrics_at_n: rank and top_n must be positive");
  if (rank > top_n) return {};
  MetricContribution c;
  c.mrr = 1.0 / static_cast<double>(rank);
  c.hr = 1.0;
  c.ndcg = 1.0 / std::log2(static_cast<double>(rank) + 1.0);
  return c;
}

namespace {

MetricReport aggregate(const std::function<std::vector<double>(const ItemSequence&)>& score_fn,
                       const std::vector<ItemSequence>& sequences, std::size_t top_n) {
  if (sequences.empty()) throw std::invalid_argument("evaluate: empty test set");
  MetricReport report;
  report.top_n = top_n;
  for (const ItemSequence& seq : sequences) {
    if (seq.valid_len == 0) continue;
    std::size_t target = seq.items.back();
    std::vector<double> scores = score_fn(seq);
    MetricContribution c = metrics_at_n(rank_of_target(scores, target), top_n);
    report.mrr += c.mrr;
    report.hr += c.hr;
    report.ndcg += c.ndcg;
    ++report.count;
  }
  if (report.count == 0) throw std::invalid_argument("evaluate: no sequence has a target item");
  report.mrr /= static_cast<double>(report.count);
  report.hr /= static_cast<double>(report.count);
  report.ndcg /= static_cast<double>(report.count);
  return report;
}

}  // namespace

MetricReport evaluate(const Model& model, const std::vector<ItemSequence>& sequences,
                      std::size_t top_n) {
  return aggregate(
      [&](const ItemSequence& seq) {
        ForwardResult fwd = forward_sequence(model, seq.items);
        return fwd.logits.back().values();  // scores at the last prediction step
      },
      sequences, top_n);
}

std::vector<double> popularity_scores(const std::vector<ItemSequence>& sequences,
                                      std::size_t item_count) {
  std::vector<double> counts(item_count, 0.0);
  for (const ItemSequence& seq : sequences)
    for (std::size_t id : seq.items)
      if (id != 0) counts[id - 1] += 1.0;
  return counts;
}

MetricReport evaluate_scores(const std::vector<double>& scores,
                             const std::vector<ItemSequence>& sequences, std::size_t top_n) {
  return aggregate([&](const ItemSequence&) { return scores; }, sequences, top_n);
}

std::string report_json(const MetricReport& report) {
  nlohmann::json j{{"top_n", report.top_n},
                   {"mrr", report.mrr},
                   {"hr", report.hr},
                   {"ndcg", report.ndcg},
                   {"count", report.count}};
  return j.dump(2);
}

std::string report_csv_header() { return "label,top_n,mrr,hr,ndcg,count"; }

std::string report_csv_row(const std::string& label, const MetricReport& report) {
  std::ostringstream os;
  os << label << ',' << report.top_n << ',' << report.mrr << ',' << report.hr << ','
     << report.ndcg << ',' << report.count;
  return os.str();
}

}  // namespace cmnrec
