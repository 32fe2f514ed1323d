#include "cmnrec/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace cmnrec {

double cosine(const std::vector<double>& u, const std::vector<double>& v) {
  if (u.size() != v.size())
    throw std::invalid_argument("cosine: vectors of different length");
  double dot = 0, nu = 0, nv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  return dot / (std::sqrt(nu) * std::sqrt(nv) + 1e-12);
}

namespace {

std::vector<double> embedding_row(const EmbeddingTable& table, std::size_t id) {
  const auto& w = table.weights.values();
  return std::vector<double>(w.begin() + static_cast<std::ptrdiff_t>(id * table.dim),
                             w.begin() + static_cast<std::ptrdiff_t>((id + 1) * table.dim));
}

}  // namespace

CorrelationProfile position_correlation_profile(const EmbeddingTable& table,
                                                const std::vector<ItemSequence>& sequences) {
  if (sequences.empty())
    throw std::invalid_argument("position_correlation_profile: no sequences");
  std::size_t T = sequences.front().length();
  CorrelationProfile profile;
  profile.positions.resize(T - 1);
  profile.mean_cosine.assign(T - 1, 0.0);
  profile.counts.assign(T - 1, 0);
  for (std::size_t i = 0; i < T - 1; ++i) profile.positions[i] = i + 1;

  for (const ItemSequence& seq : sequences) {
    if (seq.length() != T)
      throw std::invalid_argument("position_correlation_profile: mixed sequence lengths");
    std::size_t target = seq.items.back();
    if (target == 0) continue;
    std::vector<double> target_vec = embedding_row(table, target);
    for (std::size_t i = 0; i < T - 1; ++i) {
      std::size_t id = seq.items[i];
      if (id == 0) continue;
      profile.mean_cosine[i] += cosine(embedding_row(table, id), target_vec);
      ++profile.counts[i];
    }
  }
  for (std::size_t i = 0; i < T - 1; ++i)
    if (profile.counts[i] > 0) profile.mean_cosine[i] /= static_cast<double>(profile.counts[i]);
  return profile;
}

namespace {

Tensor scalarize(const Tensor& h, Scalarize mode) {
  if (mode == Scalarize::kSum) return sum(h);
  const auto& v = h.values();
  std::size_t best = static_cast<std::size_t>(
      std::max_element(v.begin(), v.end()) - v.begin());
  return slice(h, best, best + 1);
}

double l2_norm(const Tensor& t) {
  double s = 0;
  for (double v : t.values()) s += v * v;
  return std::sqrt(s);
}

}  // namespace

ContributionSeries contribution_norms(const Model& model, const ItemSequence& sequence,
                                      Scalarize mode) {
  if (sequence.valid_len < 2)
    throw std::invalid_argument("contribution_norms: need at least 2 valid items");

  Tape tape;
  ModelParams bound = bind_params(model.params, &tape);
  ForwardResult fwd = forward_sequence(model.config, bound, sequence.items);

  std::size_t T = model.config.sequence_length;
  // hidden state at the last prediction step (step T-1, index T-2)
  Tensor target = scalarize(fwd.step_hidden[T - 2], mode);
  tape.backward(target);

  ContributionSeries series;
  series.input_contribution.reserve(T - 1);
  series.hidden_contribution.reserve(T - 1);
  for (std::size_t i = 0; i < T - 1; ++i) {
    // padding lookups are untracked constants; their contribution is 0
    const Tensor& v = fwd.step_embeddings[i];
    series.input_contribution.push_back(v.tracked() ? l2_norm(tape.grad(v)) : 0.0);
    series.hidden_contribution.push_back(l2_norm(tape.grad(fwd.step_hidden[i])));
  }
  return series;
}

void write_profile_csv(const std::string& path, const CorrelationProfile& profile) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write profile file: " + path);
  out << "position,mean_cosine,count\n";
  for (std::size_t i = 0; i < profile.positions.size(); ++i) {
    if (profile.counts[i] == 0) continue;
    out << profile.positions[i] << ',' << profile.mean_cosine[i] << ',' << profile.counts[i]
        << '\n';
  }
}

void write_contributions_csv(const std::string& path, const ContributionSeries& series) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write contributions file: " + path);
  out << "position,input_contribution,hidden_contribution\n";
  for (std::size_t i = 0; i < series.input_contribution.size(); ++i)
    out << (i + 1) << ',' << series.input_contribution[i] << ','
        << series.hidden_contribution[i] << '\n';
}

}  // namespace cmnrec
