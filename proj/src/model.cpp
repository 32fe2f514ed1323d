#include "cmnrec/model.hpp"

#include <cassert>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace cmnrec {

using nlohmann::json;

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kCmnRec: return "cmnrec";
    case Variant::kSrmnBaseline: return "srmn";
    case Variant::kLstmBaseline: return "lstm";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  if (name == "cmnrec") return Variant::kCmnRec;
  if (name == "srmn") return Variant::kSrmnBaseline;
  if (name == "lstm") return Variant::kLstmBaseline;
  throw std::invalid_argument("unknown variant '" + name + "' (expected cmnrec, srmn or lstm)");
}

void ModelConfig::validate() const {
  if (item_count == 0) throw std::invalid_argument("config: item_count must be positive");
  if (embedding_dim == 0 || hidden_dim == 0)
    throw std::invalid_argument("config: embedding_dim and hidden_dim must be positive");
  if (sequence_length < 2)
    throw std::invalid_argument("config: sequence_length must be at least 2");
  if (variant == Variant::kSrmnBaseline && rule != ChunkRule::kEveryStep)
    throw std::invalid_argument("config: the srmn baseline accesses memory at every step; use "
                                "rule every-step");
  if (has_memory()) {
    if (memory_slots == 0 || slot_width == 0 || attention_dim == 0)
      throw std::invalid_argument(
          "config: memory_slots, slot_width and attention_dim must be positive");
    // surfaces degenerate schedules (e.g. TSC with g = 0) at configuration time
    make_schedule(sequence_length, memory_slots, rule);
  }
}

void ModelParams::for_each(const std::function<void(const std::string&, Tensor&)>& fn) {
  fn("embedding.weights", embedding.weights);
  fn("lstm.U_f", lstm.U_f); fn("lstm.U_i", lstm.U_i); fn("lstm.U_z", lstm.U_z); fn("lstm.U_o", lstm.U_o);
  fn("lstm.W_f", lstm.W_f); fn("lstm.W_i", lstm.W_i); fn("lstm.W_z", lstm.W_z); fn("lstm.W_o", lstm.W_o);
  fn("lstm.b_f", lstm.b_f); fn("lstm.b_i", lstm.b_i); fn("lstm.b_z", lstm.b_z); fn("lstm.b_o", lstm.b_o);
  if (interface_map) {
    fn("interface.weight", interface_map->weight);
    fn("interface.bias", interface_map->bias);
  }
  if (attention) {
    fn("attention.W", attention->W);
    fn("attention.U", attention->U);
    fn("attention.w", attention->w);
  }
  fn("output.weight", output_weight);
  fn("output.bias", output_bias);
}

void ModelParams::for_each(const std::function<void(const std::string&, const Tensor&)>& fn) const {
  const_cast<ModelParams*>(this)->for_each(
      [&](const std::string& name, Tensor& t) { fn(name, t); });
}

Model Model::init(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  Model m;
  m.config = config;
  m.params.embedding = EmbeddingTable::init(config.item_count, config.embedding_dim, rng);
  m.params.lstm = LstmParams::init(config.hidden_dim, config.controller_input_width(), rng);
  if (config.has_memory()) {
    m.params.interface_map = InterfaceParams::init(config.hidden_dim, config.slot_width, rng);
    m.params.attention =
        AttentionParams::init(config.attention_dim, config.hidden_dim, config.slot_width, rng);
  }
  std::size_t out_in = config.output_input_width();
  std::vector<double> w(config.item_count * out_in);
  for (double& x : w) x = rng.uniform(-0.08, 0.08);
  m.params.output_weight = Tensor({config.item_count, out_in}, std::move(w));
  m.params.output_bias = Tensor::zeros({config.item_count});
  return m;
}

ModelParams bind_params(const ModelParams& params, Tape* tape) {
  ModelParams bound = params;
  if (tape != nullptr)
    bound.for_each([&](const std::string&, Tensor& t) { t = tape->leaf(t); });
  return bound;
}

namespace {

Tensor inject(const Tensor& t, const std::vector<double>& delta) {
  if (delta.size() != t.size())
    throw std::invalid_argument("injection delta does not match tensor size");
  return add(t, Tensor(t.shape(), delta));
}

}  // namespace

ForwardResult forward_sequence(const ModelConfig& config, const ModelParams& bound,
                               const std::vector<std::size_t>& items,
                               const StateInjection* injection) {
  if (items.size() != config.sequence_length)
    throw std::invalid_argument("forward: sequence length " + std::to_string(items.size()) +
                                " does not match configured T = " +
                                std::to_string(config.sequence_length));
  const std::size_t T = config.sequence_length;
  const bool memory_on = config.has_memory();
  const bool chunking = config.uses_chunking();

  ChunkSchedule schedule;
  if (memory_on) schedule = make_schedule(T, config.memory_slots, config.rule);

  ForwardResult result;
  result.logits.reserve(T - 1);
  result.step_embeddings.reserve(T);
  result.step_hidden.reserve(T);

  ControllerState state = ControllerState::zero(config.hidden_dim);
  Tensor read_vec = memory_on ? Tensor::zeros({config.slot_width}) : Tensor();
  Tensor memory = memory_on ? initial_memory(config.memory_slots, config.slot_width) : Tensor();
  ChunkArea area;

  for (std::size_t step = 1; step <= T; ++step) {
    Tensor v = embed(bound.embedding, items[step - 1]);
    if (injection != nullptr && injection->site == StateInjection::Site::kEmbedding &&
        injection->step == step)
      v = inject(v, injection->delta);
    result.step_embeddings.push_back(v);

    const Tensor* r_in = memory_on ? &read_vec : nullptr;
    ControllerStepResult tentative = controller_step(bound.lstm, v, r_in, state);

    Tensor output;
    bool is_chunk_time = memory_on && schedule.contains(step);
    if (is_chunk_time && chunking) {
      // chunk time: compress the buffered states (including this step's
      // tentative one) and redo the step with the compressed state as the
      // recurrent input
      area.push(tentative.output);
      Tensor compressed = attend(area, read_vec, *bound.attention);
      ++result.counters.attention_calls;
      ControllerStepResult redone =
          controller_step(bound.lstm, v, r_in, state, &compressed);
      output = redone.output;
      state = redone.state;
      area.clear();
    } else {
      output = tentative.output;
      state = tentative.state;
    }

    if (injection != nullptr && injection->site == StateInjection::Site::kHidden &&
        injection->step == step) {
      output = inject(output, injection->delta);
      state.h = output;
    }
    if (!is_chunk_time && chunking) area.push(output);
    result.step_hidden.push_back(state.h);

    if (is_chunk_time) {
      MemoryInterface iface = decode_interface(*bound.interface_map, output, config.slot_width);
      memory = memory_write(iface, memory);
      ++result.counters.memory_writes;
      read_vec = memory_read(iface, memory);
      ++result.counters.memory_reads;
      assert(!chunking || area.empty());
    }

    if (step < T) {
      Tensor features = memory_on ? concat({output, read_vec}) : output;
      result.logits.push_back(add(matmul(bound.output_weight, features), bound.output_bias));
    }
  }
  return result;
}

ForwardResult forward_sequence(const Model& model, const std::vector<std::size_t>& items) {
  return forward_sequence(model.config, model.params, items);
}

std::size_t predict_next(const Tensor& logits) {
  if (logits.shape().size() != 1 || logits.size() == 0)
    throw std::invalid_argument("predict_next: expected nonempty 1-D logits");
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best]) best = i;
  return best + 1;
}

// ---- Checkpoint I/O ---------------------------------------------------------

namespace {

json config_to_json(const ModelConfig& c) {
  return json{{"item_count", c.item_count},
              {"embedding_dim", c.embedding_dim},
              {"hidden_dim", c.hidden_dim},
              {"memory_slots", c.memory_slots},
              {"slot_width", c.slot_width},
              {"attention_dim", c.attention_dim},
              {"sequence_length", c.sequence_length},
              {"rule", rule_name(c.rule)},
              {"variant", variant_name(c.variant)}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.item_count = j.at("item_count").get<std::size_t>();
  c.embedding_dim = j.at("embedding_dim").get<std::size_t>();
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.memory_slots = j.at("memory_slots").get<std::size_t>();
  c.slot_width = j.at("slot_width").get<std::size_t>();
  c.attention_dim = j.at("attention_dim").get<std::size_t>();
  c.sequence_length = j.at("sequence_length").get<std::size_t>();
  c.rule = parse_rule(j.at("rule").get<std::string>());
  c.variant = parse_variant(j.at("variant").get<std::string>());
  return c;
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model) {
  json j;
  j["format"] = "cmnrec-checkpoint";
  j["version"] = 1;
  j["config"] = config_to_json(model.config);
  json params = json::object();
  model.params.for_each([&](const std::string& name, const Tensor& t) {
    params[name] = json{{"shape", t.shape()}, {"values", t.values()}};
  });
  j["params"] = std::move(params);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << j.dump() << '\n';
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  json j;
  in >> j;
  if (j.value("format", "") != "cmnrec-checkpoint")
    throw std::runtime_error(path + ": not a checkpoint file");
  if (j.value("version", 0) != 1)
    throw std::runtime_error(path + ": unsupported checkpoint version");

  Model model = Model::init(config_from_json(j.at("config")), 0);
  const json& params = j.at("params");
  model.params.for_each([&](const std::string& name, Tensor& t) {
    const json& p = params.at(name);
    Shape shape = p.at("shape").get<Shape>();
    std::vector<double> values = p.at("values").get<std::vector<double>>();
    if (shape != t.shape())
      throw std::runtime_error(path + ": parameter " + name + " has shape " + shape_str(shape) +
                               ", expected " + shape_str(t.shape()));
    t = Tensor(std::move(shape), std::move(values));
  });
  return model;
}

}  // namespace cmnrec
