#include "cmnrec/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cmnrec/analysis.hpp"
#include "cmnrec/bench.hpp"
#include "cmnrec/chunk.hpp"
#include "cmnrec/data.hpp"
#include "cmnrec/eval.hpp"
#include "cmnrec/model.hpp"
#include "cmnrec/train.hpp"

namespace cmnrec {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kVersion = "cmnrec 0.1.0";

std::string timestamp_now() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  localtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", &tm);
  return buf;
}

// Per-run artifact directory: <out>/run-<timestamp>-seed<seed>, unless an
// exact directory was requested.
fs::path make_run_dir(const std::string& out, const std::string& exact, std::uint64_t seed) {
  fs::path dir = exact.empty()
                     ? fs::path(out) / ("run-" + timestamp_now() + "-seed" + std::to_string(seed))
                     : fs::path(exact);
  fs::create_directories(dir);
  return dir;
}

void write_manifest(const fs::path& dir, const std::string& command, std::uint64_t seed,
                    const json& resolved) {
  json j;
  j["version"] = kVersion;
  j["command"] = command;
  j["seed"] = seed;
  j["config"] = resolved;
  std::ofstream out(dir / "manifest.json");
  out << j.dump(2) << '\n';
}

std::size_t threads_from_env(std::size_t flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("CMNREC_THREADS")) {
    long n = std::strtol(env, nullptr, 10);
    if (n >= 1) return static_cast<std::size_t>(n);
  }
  return 1;
}

struct ModelFlags {
  std::size_t items = 0;
  std::size_t embedding_dim = 128;
  std::size_t hidden_dim = 256;
  std::size_t memory_slots = 4;
  std::size_t slot_width = 256;
  std::size_t attention_dim = 64;
  std::string rule = "tsc";
  std::string variant = "cmnrec";
  std::string vocab_path;

  void attach(CLI::App* cmd) {
    cmd->add_option("--items", items, "vocabulary size I (or use --vocab)");
    cmd->add_option("--vocab", vocab_path, "vocabulary JSON from the preprocess step");
    cmd->add_option("--k,--embedding-dim", embedding_dim, "item embedding size");
    cmd->add_option("--hidden-dim", hidden_dim, "controller hidden size");
    cmd->add_option("--M,--memory-slots", memory_slots, "memory slots (chunks per sequence)");
    cmd->add_option("--m,--slot-width", slot_width, "memory slot width");
    cmd->add_option("--b,--attention-dim", attention_dim, "attention dimension");
    cmd->add_option("--rule", rule, "chunk rule: pec, tsc, exc, every-step")
        ->check(CLI::IsMember({"pec", "tsc", "exc", "every-step"}));
    cmd->add_option("--variant", variant, "model variant: cmnrec, srmn, lstm")
        ->check(CLI::IsMember({"cmnrec", "srmn", "lstm"}));
  }

  ModelConfig resolve(std::size_t sequence_length) const {
    ModelConfig c;
    c.item_count = items;
    if (c.item_count == 0 && !vocab_path.empty())
      c.item_count = read_vocabulary(vocab_path).size();
    c.embedding_dim = embedding_dim;
    c.hidden_dim = hidden_dim;
    c.memory_slots = memory_slots;
    c.slot_width = slot_width;
    c.attention_dim = attention_dim;
    c.sequence_length = sequence_length;
    c.rule = parse_rule(rule);
    c.variant = parse_variant(variant);
    if (c.variant != Variant::kCmnRec) c.rule = ChunkRule::kEveryStep;
    if (c.item_count == 0)
      throw std::runtime_error("vocabulary size unknown: pass --items or --vocab");
    c.validate();
    return c;
  }

  json resolved_json(const ModelConfig& c) const {
    return json{{"item_count", c.item_count},       {"embedding_dim", c.embedding_dim},
                {"hidden_dim", c.hidden_dim},       {"memory_slots", c.memory_slots},
                {"slot_width", c.slot_width},       {"attention_dim", c.attention_dim},
                {"sequence_length", c.sequence_length}, {"rule", rule_name(c.rule)},
                {"variant", variant_name(c.variant)}};
  }
};

std::size_t sequence_length_of(const std::vector<ItemSequence>& seqs, const std::string& what) {
  if (seqs.empty()) throw std::runtime_error(what + ": empty dataset");
  std::size_t T = seqs.front().length();
  for (const auto& s : seqs)
    if (s.length() != T) throw std::runtime_error(what + ": mixed sequence lengths");
  return T;
}

// ---- subcommands -----------------------------------------------------------

void setup_schedule(CLI::App& app) {
  auto* cmd = app.add_subcommand("schedule", "print the chunk time steps for (T, M, rule)");
  auto T = std::make_shared<std::size_t>(0);
  auto M = std::make_shared<std::size_t>(0);
  auto rule = std::make_shared<std::string>("tsc");
  cmd->add_option("--T", *T, "sequence length")->required();
  cmd->add_option("--M", *M, "number of chunks / memory slots")->required();
  cmd->add_option("--rule", *rule, "pec, tsc, exc or every-step")
      ->check(CLI::IsMember({"pec", "tsc", "exc", "every-step"}));
  cmd->callback([=]() {
    ChunkSchedule s = make_schedule(*T, *M, parse_rule(*rule));
    std::cout << s.csv() << '\n';
  });
}

void setup_synth(CLI::App& app) {
  auto* cmd = app.add_subcommand("synth", "generate a seeded synthetic Markov dataset");
  struct Opts {
    SyntheticSpec spec;
    std::size_t min_len = 0;
    std::string out = ".";
    std::string run_dir;
    std::string split;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("--items", o->spec.item_count, "vocabulary size");
  cmd->add_option("--sequences", o->spec.sequence_count, "number of sequences");
  cmd->add_option("--T", o->spec.length, "sequence length after padding");
  cmd->add_option("--min-len", o->min_len, "minimum valid length (default: T, no padding)");
  cmd->add_option("--clusters", o->spec.cluster_count, "item clusters (0 = auto)");
  cmd->add_option("--jump-prob", o->spec.jump_prob, "probability of leaving the chain");
  cmd->add_option("--seed", o->spec.seed, "generator seed");
  cmd->add_option("--out", o->out, "base output directory");
  cmd->add_option("--run-dir", o->run_dir, "exact run directory (overrides --out naming)");
  cmd->add_option("--split", o->split, "train,valid,test ratios, e.g. 0.8,0.02,0.18");
  cmd->callback([=]() {
    SyntheticSpec spec = o->spec;
    spec.min_valid_len = o->min_len == 0 ? spec.length : o->min_len;
    std::vector<ItemSequence> seqs = generate_markov_dataset(spec);
    fs::path dir = make_run_dir(o->out, o->run_dir, spec.seed);
    json resolved{{"items", spec.item_count},   {"sequences", spec.sequence_count},
                  {"T", spec.length},           {"min_valid_len", spec.min_valid_len},
                  {"clusters", spec.cluster_count}, {"jump_prob", spec.jump_prob},
                  {"split", o->split}};
    if (o->split.empty()) {
      write_sequences((dir / "sequences.txt").string(), seqs);
    } else {
      double r[3];
      if (std::sscanf(o->split.c_str(), "%lf,%lf,%lf", &r[0], &r[1], &r[2]) != 3)
        throw std::runtime_error("--split expects three comma-separated ratios");
      DatasetSplit split = split_dataset(std::move(seqs), r[0], r[1], r[2], spec.seed);
      write_sequences((dir / "train.txt").string(), split.train);
      write_sequences((dir / "valid.txt").string(), split.valid);
      write_sequences((dir / "test.txt").string(), split.test);
    }
    write_manifest(dir, "synth", spec.seed, resolved);
    std::cout << dir.string() << '\n';
  });
}

void setup_preprocess(CLI::App& app) {
  auto* cmd = app.add_subcommand("preprocess",
                                 "events CSV -> padded fixed-length sequences + vocabulary");
  struct Opts {
    std::string events;
    DatasetSpec spec;
    std::string out = ".";
    std::string run_dir;
    std::string split;
    std::uint64_t seed = 1;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("--events", o->events, "user,item,timestamp CSV")->required();
  cmd->add_option("--L,--length", o->spec.target_length, "window length L");
  cmd->add_option("--min-len", o->spec.min_length, "drop windows shorter than this");
  cmd->add_option("--min-count", o->spec.min_item_count, "drop items seen fewer times");
  cmd->add_option("--split", o->split, "train,valid,test ratios");
  cmd->add_option("--seed", o->seed, "split shuffle seed");
  cmd->add_option("--out", o->out, "base output directory");
  cmd->add_option("--run-dir", o->run_dir, "exact run directory");
  cmd->callback([=]() {
    PreprocessResult result = preprocess(read_events_csv(o->events), o->spec);
    fs::path dir = make_run_dir(o->out, o->run_dir, o->seed);
    write_vocabulary((dir / "vocab.json").string(), result.vocabulary);
    json resolved{{"events", o->events},
                  {"L", o->spec.target_length},
                  {"min_len", o->spec.min_length},
                  {"min_count", o->spec.min_item_count},
                  {"items", result.vocabulary.size()},
                  {"sequences", result.sequences.size()},
                  {"split", o->split}};
    if (o->split.empty()) {
      write_sequences((dir / "sequences.txt").string(), result.sequences);
    } else {
      double r[3];
      if (std::sscanf(o->split.c_str(), "%lf,%lf,%lf", &r[0], &r[1], &r[2]) != 3)
        throw std::runtime_error("--split expects three comma-separated ratios");
      DatasetSplit split = split_dataset(std::move(result.sequences), r[0], r[1], r[2], o->seed);
      write_sequences((dir / "train.txt").string(), split.train);
      write_sequences((dir / "valid.txt").string(), split.valid);
      write_sequences((dir / "test.txt").string(), split.test);
    }
    write_manifest(dir, "preprocess", o->seed, resolved);
    std::cout << dir.string() << '\n';
  });
}

void setup_train(CLI::App& app) {
  auto* cmd = app.add_subcommand("train", "train a model and keep the best-validation checkpoint");
  struct Opts {
    std::string train_path, valid_path, test_path;
    ModelFlags model;
    TrainConfig tc;
    std::size_t threads_flag = 0;
    std::string out = ".";
    std::string run_dir;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("--train", o->train_path, "training sequences")->required();
  cmd->add_option("--valid", o->valid_path, "validation sequences")->required();
  cmd->add_option("--test", o->test_path, "optional test sequences (final metrics)");
  o->model.attach(cmd);
  cmd->add_option("--epochs", o->tc.max_epochs, "maximum training epochs");
  cmd->add_option("--batch", o->tc.batch_size, "mini-batch size");
  cmd->add_option("--lr", o->tc.learning_rate, "Adam learning rate");
  cmd->add_option("--patience", o->tc.patience, "early-stop patience (epochs)");
  cmd->add_option("--seed", o->tc.seed, "run seed");
  cmd->add_option("--topn", o->tc.eval_top_n, "validation metric cutoff N");
  cmd->add_option("--threads", o->threads_flag, "gradient workers (default CMNREC_THREADS or 1)");
  cmd->add_option("--out", o->out, "base output directory");
  cmd->add_option("--run-dir", o->run_dir, "exact run directory");
  cmd->callback([=]() {
    std::vector<ItemSequence> train_set = read_sequences(o->train_path);
    std::vector<ItemSequence> valid_set = read_sequences(o->valid_path);
    std::size_t T = sequence_length_of(train_set, "train");
    ModelConfig config = o->model.resolve(T);
    TrainConfig tc = o->tc;
    tc.threads = threads_from_env(o->threads_flag);

    Model model = Model::init(config, tc.seed);
    TrainResult result = train(model, train_set, valid_set, tc);

    fs::path dir = make_run_dir(o->out, o->run_dir, tc.seed);
    write_history_csv((dir / "history.csv").string(), result.history);
    save_checkpoint((dir / "checkpoint.json").string(), result.model);
    json resolved = o->model.resolved_json(config);
    resolved["epochs"] = tc.max_epochs;
    resolved["batch"] = tc.batch_size;
    resolved["lr"] = tc.learning_rate;
    resolved["patience"] = tc.patience;
    resolved["topn"] = tc.eval_top_n;
    resolved["threads"] = tc.threads;
    resolved["train"] = o->train_path;
    resolved["valid"] = o->valid_path;
    resolved["test"] = o->test_path;
    write_manifest(dir, "train", tc.seed, resolved);

    if (!o->test_path.empty()) {
      MetricReport report =
          evaluate(result.model, read_sequences(o->test_path), tc.eval_top_n);
      std::ofstream mout(dir / "metrics.json");
      mout << report_json(report) << '\n';
      std::cout << report_json(report) << '\n';
    }
    std::cout << dir.string() << '\n';
  });
}

void setup_eval(CLI::App& app) {
  auto* cmd = app.add_subcommand("eval", "top-N metrics of a checkpoint on a dataset");
  struct Opts {
    std::string checkpoint, data, out;
    std::size_t top_n = 5;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("--checkpoint", o->checkpoint, "model checkpoint")->required();
  cmd->add_option("--data", o->data, "sequences to evaluate")->required();
  cmd->add_option("--topn", o->top_n, "cutoff N");
  cmd->add_option("--out", o->out, "directory for metrics.json / metrics.csv");
  cmd->callback([=]() {
    Model model = load_checkpoint(o->checkpoint);
    std::vector<ItemSequence> data = read_sequences(o->data);
    MetricReport report = evaluate(model, data, o->top_n);
    std::cout << report_json(report) << '\n';
    if (!o->out.empty()) {
      fs::create_directories(o->out);
      std::ofstream j(fs::path(o->out) / "metrics.json");
      j << report_json(report) << '\n';
      std::ofstream c(fs::path(o->out) / "metrics.csv");
      c << report_csv_header() << '\n'
        << report_csv_row(variant_name(model.config.variant), report) << '\n';
    }
  });
}

void setup_bench(CLI::App& app) {
  auto* cmd = app.add_subcommand(
      "bench", "wall-clock and memory-op comparison across chunk rules / variants");
  struct Opts {
    std::string data;
    std::string variants = "tsc,every-step";
    std::string baseline = "every-step";
    ModelFlags model;
    std::size_t reps = 5;
    TrainConfig tc;
    std::string out = ".";
    std::string run_dir;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("--data", o->data, "training sequences to benchmark on")->required();
  cmd->add_option("--variants", o->variants,
                  "comma list of pec,tsc,exc,every-step,lstm to time");
  cmd->add_option("--baseline", o->baseline, "variant the speedups are relative to");
  o->model.attach(cmd);
  cmd->add_option("--reps", o->reps, "timed repetitions per variant (>= 3)");
  cmd->add_option("--batch", o->tc.batch_size, "mini-batch size");
  cmd->add_option("--lr", o->tc.learning_rate, "Adam learning rate");
  cmd->add_option("--seed", o->tc.seed, "run seed");
  cmd->add_option("--out", o->out, "base output directory");
  cmd->add_option("--run-dir", o->run_dir, "exact run directory");
  cmd->callback([=]() {
    std::vector<ItemSequence> data = read_sequences(o->data);
    std::size_t T = sequence_length_of(data, "bench");
    TrainConfig tc = o->tc;
    tc.threads = 1;  // timed runs are single-threaded for fair comparison

    std::vector<TimingReport> reports;
    std::size_t baseline_index = reports.size();
    std::stringstream ss(o->variants);
    std::string name;
    bool baseline_found = false;
    while (std::getline(ss, name, ',')) {
      ModelFlags flags = o->model;
      if (name == "lstm") {
        flags.variant = "lstm";
        flags.rule = "every-step";
      } else {
        flags.variant = "cmnrec";
        flags.rule = name;
      }
      ModelConfig config = flags.resolve(T);
      Model model = Model::init(config, tc.seed);
      if (name == o->baseline) {
        baseline_index = reports.size();
        baseline_found = true;
      }
      reports.push_back(time_epoch(model, data, tc, o->reps, name));
    }
    if (!baseline_found)
      throw std::runtime_error("baseline '" + o->baseline + "' is not among --variants");

    CostModel cost{o->model.hidden_dim, o->model.embedding_dim, T, o->model.memory_slots};
    AnalyticCosts analytic = analytic_costs(cost);

    fs::path dir = make_run_dir(o->out, o->run_dir, tc.seed);
    std::ofstream j(dir / "bench.json");
    j << bench_report_json(reports, baseline_index, &analytic, &cost) << '\n';
    std::ofstream c(dir / "speedup.csv");
    c << speedup_csv(reports, baseline_index);
    json resolved{{"data", o->data},     {"variants", o->variants}, {"baseline", o->baseline},
                  {"reps", o->reps},     {"batch", tc.batch_size},  {"lr", tc.learning_rate},
                  {"T", T},              {"M", o->model.memory_slots}};
    write_manifest(dir, "bench", tc.seed, resolved);
    std::cout << speedup_csv(reports, baseline_index);
    std::cout << dir.string() << '\n';
  });
}

void setup_analyze(CLI::App& app) {
  auto* cmd = app.add_subcommand(
      "analyze", "position-correlation profile and contribution norms of a trained model");
  struct Opts {
    std::string checkpoint, data;
    std::string out = ".";
    std::string run_dir;
    std::string scalarize = "sum";
    std::size_t max_sequences = 200;
    std::uint64_t seed = 1;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("--checkpoint", o->checkpoint, "trained model checkpoint")->required();
  cmd->add_option("--data", o->data, "sequences to analyze")->required();
  cmd->add_option("--scalarize", o->scalarize, "hidden-state reduction: sum or max")
      ->check(CLI::IsMember({"sum", "max"}));
  cmd->add_option("--max-sequences", o->max_sequences, "cap on analyzed sequences");
  cmd->add_option("--out", o->out, "base output directory");
  cmd->add_option("--run-dir", o->run_dir, "exact run directory");
  cmd->callback([=]() {
    Model model = load_checkpoint(o->checkpoint);
    std::vector<ItemSequence> data = read_sequences(o->data);
    fs::path dir = make_run_dir(o->out, o->run_dir, o->seed);

    CorrelationProfile profile = position_correlation_profile(model.params.embedding, data);
    write_profile_csv((dir / "correlation_profile.csv").string(), profile);

    Scalarize mode = o->scalarize == "max" ? Scalarize::kMaxComponent : Scalarize::kSum;
    std::size_t n = std::min(o->max_sequences, data.size());
    ContributionSeries mean_series;
    std::size_t used = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (data[i].valid_len < 2) continue;
      ContributionSeries s = contribution_norms(model, data[i], mode);
      if (mean_series.input_contribution.empty()) {
        mean_series = s;
      } else {
        for (std::size_t p = 0; p < s.input_contribution.size(); ++p) {
          mean_series.input_contribution[p] += s.input_contribution[p];
          mean_series.hidden_contribution[p] += s.hidden_contribution[p];
        }
      }
      ++used;
    }
    if (used == 0) throw std::runtime_error("analyze: no sequence with >= 2 valid items");
    for (std::size_t p = 0; p < mean_series.input_contribution.size(); ++p) {
      mean_series.input_contribution[p] /= static_cast<double>(used);
      mean_series.hidden_contribution[p] /= static_cast<double>(used);
    }
    write_contributions_csv((dir / "contributions.csv").string(), mean_series);

    json resolved{{"checkpoint", o->checkpoint},
                  {"data", o->data},
                  {"scalarize", o->scalarize},
                  {"sequences_analyzed", used}};
    write_manifest(dir, "analyze", o->seed, resolved);
    std::cout << dir.string() << '\n';
  });
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"chunk-accelerated memory-network sequential recommender"};
  try {
    app.set_version_flag("--version", kVersion);
    app.set_config("--config", "", "key=value config file ([subcommand] sections); flags win");
    app.fallthrough();
    app.require_subcommand(1);

    setup_schedule(app);
    setup_synth(app);
    setup_preprocess(app);
    setup_train(app);
    setup_eval(app);
    setup_bench(app);
    setup_analyze(app);

    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::FileError& e) {
    // a named-but-missing config file is a runtime failure, not bad usage
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace cmnrec
