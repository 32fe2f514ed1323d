#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cmnrec/data.hpp"
#include "cmnrec/model.hpp"
#include "cmnrec/train.hpp"

namespace cmnrec {

/// Per-step analytic costs: controller h^2 + k*h per step, memory access 4h^2.
struct CostModel {
  std::size_t hidden = 0;     // h
  std::size_t embedding = 0;  // k
  std::size_t length = 0;     // T
  std::size_t slots = 0;      // M
};

struct AnalyticCosts {
  std::uint64_t every_step_total = 0;  // (5h^2 + kh) * T
  std::uint64_t chunked_total = 0;     // (h^2 + kh) * T + 4Mh^2
  double ratio = 0;                    // every_step / chunked
};

/// Exact integer totals from the per-step costs; for h = 2k the ratio reduces
/// to 11 / (3 + 8M/T), which is 1 at M = T and approaches 11/3 as M shrinks.
/// (A closed form with numerator 8 is sometimes quoted for this ratio; it is
/// inconsistent with these per-step costs, so the totals are computed, not
/// taken from a closed form.)
AnalyticCosts analytic_costs(const CostModel& cost);

struct TimingReport {
  std::string label;
  std::size_t repetitions = 0;
  std::vector<double> epoch_seconds;  // one timed training epoch each
  double mean_epoch_seconds = 0;
  double stddev_epoch_seconds = 0;
  double median_epoch_seconds = 0;
  double inference_us_per_sequence = 0;
  std::uint64_t memory_ops_per_epoch = 0;  // reads + writes across the dataset
};

/// Times full training epochs (forward + backward + Adam), excluding a
/// warm-up epoch and all data loading / metric computation. Requires at
/// least 3 repetitions.
TimingReport time_epoch(const Model& initial, const std::vector<ItemSequence>& data,
                        const TrainConfig& config, std::size_t repetitions,
                        const std::string& label);

/// Speedup multiples relative to reports[baseline_index].
std::string speedup_csv(const std::vector<TimingReport>& reports, std::size_t baseline_index);
std::string bench_report_json(const std::vector<TimingReport>& reports,
                              std::size_t baseline_index, const AnalyticCosts* analytic,
                              const CostModel* cost);

/// "model name" from /proc/cpuinfo, or "unknown".
std::string cpu_model_string();

}  // namespace cmnrec
