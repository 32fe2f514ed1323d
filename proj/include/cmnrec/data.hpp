#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace cmnrec {

/// Fixed-length, front-padded item sequence. ID 0 is padding; all padding
/// precedes all real items.
struct ItemSequence {
  std::vector<std::size_t> items;
  std::size_t valid_len = 0;

  std::size_t length() const { return items.size(); }
  /// Builds from raw ids, deriving valid_len and checking the padding layout.
  static ItemSequence from_items(std::vector<std::size_t> items);
};

struct DatasetSpec {
  std::size_t target_length = 100;   // L
  std::size_t min_length = 20;       // l
  std::size_t min_item_count = 20;   // cold-item threshold
  double train_ratio = 0.80;
  double valid_ratio = 0.02;
  double test_ratio = 0.18;
};

struct Event {
  std::string user;
  std::string item;
  long long timestamp = 0;
};

struct PreprocessResult {
  std::vector<ItemSequence> sequences;
  std::map<std::string, std::size_t> vocabulary;  // raw item token -> dense id (1..I)
};

/// user,item,timestamp CSV. Malformed lines are reported with their number.
std::vector<Event> read_events_csv(const std::string& path);

/// Per user: chronological items (stable on timestamp ties), cold items
/// dropped, consecutive windows of target_length; trailing windows shorter
/// than min_length are dropped, the rest front-padded with 0.
PreprocessResult preprocess(std::vector<Event> events, const DatasetSpec& spec);

struct DatasetSplit {
  std::vector<ItemSequence> train, valid, test;
};

/// Seeded shuffle then contiguous partition; valid/test sizes floor-rounded,
/// remainder to train. Any empty split is an error.
DatasetSplit split_dataset(std::vector<ItemSequence> sequences, double train_ratio,
                           double valid_ratio, double test_ratio, std::uint64_t seed);

/// One sequence per line, space-separated decimal ids, padding explicit.
std::vector<ItemSequence> read_sequences(const std::string& path);
void write_sequences(const std::string& path, const std::vector<ItemSequence>& sequences);

void write_vocabulary(const std::string& path, const std::map<std::string, std::size_t>& vocab);
std::map<std::string, std::size_t> read_vocabulary(const std::string& path);

/// Seeded Markov generator: items live in clusters, each item has a fixed
/// within-cluster successor, and with jump_prob the walk teleports uniformly.
/// Gives both a learnable next-item rule and a recency-correlated structure.
struct SyntheticSpec {
  std::size_t item_count = 500;
  std::size_t sequence_count = 2000;
  std::size_t length = 100;            // T
  std::size_t min_valid_len = 100;     // uniform in [min_valid_len, length]
  std::size_t cluster_count = 0;       // 0 = max(2, item_count / 10)
  double jump_prob = 0.03;
  std::uint64_t seed = 1;
};

std::vector<ItemSequence> generate_markov_dataset(const SyntheticSpec& spec);

}  // namespace cmnrec
