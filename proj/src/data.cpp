#include "cmnrec/data.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "cmnrec/rng.hpp"

namespace cmnrec {

using nlohmann::json;

ItemSequence ItemSequence::from_items(std::vector<std::size_t> items) {
  if (items.empty()) throw std::invalid_argument("sequence: empty");
  std::size_t first_real = items.size();
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i] != 0) {
      first_real = i;
      break;
    }
  }
  for (std::size_t i = first_real; i < items.size(); ++i)
    if (items[i] == 0)
      throw std::invalid_argument("sequence: padding (0) after a real item at position " +
                                  std::to_string(i + 1));
  ItemSequence s;
  s.valid_len = items.size() - first_real;
  s.items = std::move(items);
  return s;
}

std::vector<Event> read_events_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open events file: " + path);
  std::vector<Event> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("user", 0) == 0) continue;  // optional header
    std::istringstream ss(line);
    Event e;
    std::string ts;
    if (!std::getline(ss, e.user, ',') || !std::getline(ss, e.item, ',') ||
        !std::getline(ss, ts)) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected user,item,timestamp");
    }
    try {
      e.timestamp = std::stoll(ts);
    } catch (const std::exception&) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": bad timestamp '" + ts +
                               "'");
    }
    events.push_back(std::move(e));
  }
  return events;
}

PreprocessResult preprocess(std::vector<Event> events, const DatasetSpec& spec) {
  if (spec.min_length > spec.target_length)
    throw std::invalid_argument("preprocess: min_length exceeds target_length");

  // count item frequency, drop cold items
  std::unordered_map<std::string, std::size_t> freq;
  for (const Event& e : events) ++freq[e.item];
  std::erase_if(events, [&](const Event& e) { return freq[e.item] < spec.min_item_count; });

  // dense ids in lexicographic token order (deterministic)
  std::map<std::string, std::size_t> vocab;
  for (const Event& e : events) vocab.emplace(e.item, 0);
  std::size_t next_id = 1;
  for (auto& [token, id] : vocab) id = next_id++;

  // chronological per user, stable on timestamp ties
  std::map<std::string, std::vector<std::pair<long long, std::size_t>>> per_user;
  for (std::size_t i = 0; i < events.size(); ++i)
    per_user[events[i].user].emplace_back(events[i].timestamp, i);

  std::vector<ItemSequence> sequences;
  const std::size_t L = spec.target_length;
  for (auto& [user, entries] : per_user) {
    std::stable_sort(entries.begin(), entries.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::size_t> ids;
    ids.reserve(entries.size());
    for (const auto& [ts, idx] : entries) ids.push_back(vocab[events[idx].item]);

    for (std::size_t start = 0; start < ids.size(); start += L) {
      std::size_t len = std::min(L, ids.size() - start);
      if (len < spec.min_length) continue;
      std::vector<std::size_t> window(L, 0);
      std::copy(ids.begin() + static_cast<std::ptrdiff_t>(start),
                ids.begin() + static_cast<std::ptrdiff_t>(start + len),
                window.begin() + static_cast<std::ptrdiff_t>(L - len));
      sequences.push_back(ItemSequence::from_items(std::move(window)));
    }
  }
  if (sequences.empty())
    throw std::runtime_error("preprocess: no sequences survive filtering");
  return PreprocessResult{std::move(sequences), std::move(vocab)};
}

DatasetSplit split_dataset(std::vector<ItemSequence> sequences, double train_ratio,
                           double valid_ratio, double test_ratio, std::uint64_t seed) {
  if (train_ratio <= 0 || valid_ratio <= 0 || test_ratio <= 0)
    throw std::invalid_argument("split_dataset: ratios must be positive");
  double total = train_ratio + valid_ratio + test_ratio;
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("split_dataset: ratios must sum to 1");

  Rng rng(seed);
  rng.shuffle(sequences);

  std::size_t n = sequences.size();
  std::size_t n_valid = static_cast<std::size_t>(valid_ratio * static_cast<double>(n));
  std::size_t n_test = static_cast<std::size_t>(test_ratio * static_cast<double>(n));
  if (n_valid + n_test >= n)
    throw std::invalid_argument("split_dataset: not enough sequences for the requested split");
  std::size_t n_train = n - n_valid - n_test;
  if (n_train == 0 || n_valid == 0 || n_test == 0)
    throw std::invalid_argument("split_dataset: a split would be empty with " + std::to_string(n) +
                                " sequences");

  DatasetSplit out;
  out.train.assign(sequences.begin(), sequences.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.valid.assign(sequences.begin() + static_cast<std::ptrdiff_t>(n_train),
                   sequences.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid));
  out.test.assign(sequences.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid),
                  sequences.end());
  return out;
}

std::vector<ItemSequence> read_sequences(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open sequence file: " + path);
  std::vector<ItemSequence> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::vector<std::size_t> items;
    long long v;
    while (ss >> v) {
      if (v < 0)
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": negative item id " +
                                 std::to_string(v));
      items.push_back(static_cast<std::size_t>(v));
    }
    if (!ss.eof())
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": malformed item id");
    try {
      out.push_back(ItemSequence::from_items(std::move(items)));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (out.empty()) throw std::runtime_error(path + ": no sequences");
  return out;
}

void write_sequences(const std::string& path, const std::vector<ItemSequence>& sequences) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write sequence file: " + path);
  for (const auto& s : sequences) {
    for (std::size_t i = 0; i < s.items.size(); ++i) {
      if (i) out << ' ';
      out << s.items[i];
    }
    out << '\n';
  }
}

void write_vocabulary(const std::string& path, const std::map<std::string, std::size_t>& vocab) {
  json j = json::object();
  for (const auto& [token, id] : vocab) j[token] = id;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write vocabulary file: " + path);
  out << j.dump(2) << '\n';
}

std::map<std::string, std::size_t> read_vocabulary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vocabulary file: " + path);
  json j;
  in >> j;
  std::map<std::string, std::size_t> vocab;
  for (auto it = j.begin(); it != j.end(); ++it) vocab[it.key()] = it.value().get<std::size_t>();
  return vocab;
}

std::vector<ItemSequence> generate_markov_dataset(const SyntheticSpec& spec) {
  if (spec.item_count < 2 || spec.sequence_count == 0 || spec.length < 2)
    throw std::invalid_argument("synthetic: need >= 2 items, >= 1 sequence, length >= 2");
  if (spec.min_valid_len < 2 || spec.min_valid_len > spec.length)
    throw std::invalid_argument("synthetic: min_valid_len must be in [2, length]");

  std::size_t clusters = spec.cluster_count;
  if (clusters == 0) clusters = std::max<std::size_t>(2, spec.item_count / 10);
  clusters = std::min(clusters, spec.item_count);
  std::size_t cluster_size = (spec.item_count + clusters - 1) / clusters;

  // successor: next item within the cluster block, wrapping
  auto successor = [&](std::size_t id) {
    std::size_t c = (id - 1) / cluster_size;
    std::size_t lo = c * cluster_size + 1;
    std::size_t hi = std::min(lo + cluster_size - 1, spec.item_count);
    return id == hi ? lo : id + 1;
  };

  Rng rng(spec.seed);
  std::vector<ItemSequence> out;
  out.reserve(spec.sequence_count);
  for (std::size_t s = 0; s < spec.sequence_count; ++s) {
    std::size_t valid =
        spec.min_valid_len + rng.below(spec.length - spec.min_valid_len + 1);
    std::vector<std::size_t> items(spec.length, 0);
    std::size_t cur = 1 + rng.below(spec.item_count);
    for (std::size_t i = spec.length - valid; i < spec.length; ++i) {
      items[i] = cur;
      cur = rng.next_double() < spec.jump_prob ? 1 + rng.below(spec.item_count) : successor(cur);
    }
    out.push_back(ItemSequence::from_items(std::move(items)));
  }
  return out;
}

}  // namespace cmnrec
