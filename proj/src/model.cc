#include "pcs/model.h"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pcs/random.h"

namespace pcs {
namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

std::vector<DenseLayer> chain(std::size_t in,
                              const std::vector<std::size_t>& widths,
                              std::size_t& offset) {
  std::vector<DenseLayer> layers;
  for (std::size_t out : widths) {
    layers.push_back(DenseLayer{in, out, offset});
    offset += layers.back().size();
    in = out;
  }
  return layers;
}

// Activations recorded during a forward pass through a dense chain.
struct ChainCache {
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> pre;
};

std::vector<double> forward_chain(std::span<const double> values,
                                  const std::vector<DenseLayer>& layers,
                                  std::span<const double> input,
                                  bool relu_last, ChainCache* cache) {
  std::vector<double> act(input.begin(), input.end());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const DenseLayer& layer = layers[l];
    std::vector<double> z(layer.out);
    const double* w = values.data() + layer.offset;
    const double* b = values.data() + layer.bias_offset();
    for (std::size_t r = 0; r < layer.out; ++r) {
      double acc = b[r];
      const double* row = w + r * layer.in;
      for (std::size_t c = 0; c < layer.in; ++c) acc += row[c] * act[c];
      z[r] = acc;
    }
    const bool activate = relu_last || l + 1 < layers.size();
    if (cache) {
      cache->inputs.push_back(act);
      cache->pre.push_back(z);
    }
    if (activate) {
      for (double& v : z) v = v > 0.0 ? v : 0.0;
    }
    act = std::move(z);
  }
  return act;
}

// Accumulates parameter gradients into `grad` and returns d(loss)/d(input).
std::vector<double> backward_chain(std::span<const double> values,
                                   const std::vector<DenseLayer>& layers,
                                   const ChainCache& cache, bool relu_last,
                                   std::vector<double> d_out,
                                   std::span<double> grad) {
  for (std::size_t l = layers.size(); l-- > 0;) {
    const DenseLayer& layer = layers[l];
    const bool activate = relu_last || l + 1 < layers.size();
    if (activate) {
      for (std::size_t r = 0; r < layer.out; ++r) {
        if (!(cache.pre[l][r] > 0.0)) d_out[r] = 0.0;
      }
    }
    const std::vector<double>& in = cache.inputs[l];
    const double* w = values.data() + layer.offset;
    double* gw = grad.data() + layer.offset;
    double* gb = grad.data() + layer.bias_offset();
    std::vector<double> d_in(layer.in, 0.0);
    for (std::size_t r = 0; r < layer.out; ++r) {
      const double d = d_out[r];
      if (d == 0.0) continue;
      gb[r] += d;
      const double* row = w + r * layer.in;
      double* grow = gw + r * layer.in;
      for (std::size_t c = 0; c < layer.in; ++c) {
        grow[c] += d * in[c];
        d_in[c] += d * row[c];
      }
    }
    d_out = std::move(d_in);
  }
  return d_out;
}

void check_input(const ModelParams& params, std::span<const double> x) {
  if (x.size() != params.arch.input_dim) {
    throw Error("feature dimension mismatch: model expects " +
                std::to_string(params.arch.input_dim) + ", got " +
                std::to_string(x.size()));
  }
}

std::vector<double> concat(const std::vector<double>& a,
                           const std::vector<double>& b) {
  std::vector<double> out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace

void Architecture::validate() const {
  if (input_dim == 0) throw Error("architecture: input_dim must be > 0");
  if (trunk_widths.empty()) throw Error("architecture: empty trunk");
  for (std::size_t w : trunk_widths) {
    if (w == 0) throw Error("architecture: zero-width trunk layer");
  }
  for (std::size_t w : fusion_widths) {
    if (w == 0) throw Error("architecture: zero-width fusion layer");
  }
}

ParamLayout make_layout(const Architecture& arch) {
  arch.validate();
  ParamLayout layout;
  std::size_t offset = 0;
  layout.trunk = chain(arch.input_dim, arch.trunk_widths, offset);
  layout.rank_head = chain(arch.embedding_dim(), {1}, offset);
  std::vector<std::size_t> fusion = arch.fusion_widths;
  fusion.push_back(3);
  layout.fusion_head = chain(2 * arch.embedding_dim(), fusion, offset);
  layout.total = offset;
  return layout;
}

ModelParams init_params(const Architecture& arch, std::uint64_t seed,
                        const Hyperparams& hyper) {
  ModelParams p;
  p.arch = arch;
  p.layout = make_layout(arch);
  p.values.assign(p.layout.total, 0.0);
  p.hyper = hyper;
  p.adam.m.assign(p.layout.total, 0.0);
  p.adam.v.assign(p.layout.total, 0.0);
  Rng rng(seed);
  for (const auto* block :
       {&p.layout.trunk, &p.layout.rank_head, &p.layout.fusion_head}) {
    for (const DenseLayer& layer : *block) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (std::size_t k = 0; k < layer.weight_count(); ++k) {
        p.values[layer.offset + k] = dist(rng);
      }
    }
  }
  return p;
}

double rank_score(const ModelParams& params, std::span<const double> x) {
  check_input(params, x);
  const auto emb =
      forward_chain(params.values, params.layout.trunk, x, true, nullptr);
  return forward_chain(params.values, params.layout.rank_head, emb, false,
                       nullptr)[0];
}

PairTerms forward_pair(const ModelParams& params, std::span<const double> x_i,
                       std::span<const double> x_j, Outcome y) {
  check_input(params, x_i);
  check_input(params, x_j);
  const auto& L = params.layout;
  const auto e_i = forward_chain(params.values, L.trunk, x_i, true, nullptr);
  const auto e_j = forward_chain(params.values, L.trunk, x_j, true, nullptr);
  PairTerms t;
  t.y = y;
  t.f_i = forward_chain(params.values, L.rank_head, e_i, false, nullptr)[0];
  t.f_j = forward_chain(params.values, L.rank_head, e_j, false, nullptr)[0];
  const auto logits = forward_chain(params.values, L.fusion_head,
                                    concat(e_i, e_j), false, nullptr);
  std::copy(logits.begin(), logits.end(), t.logits.begin());
  return t;
}

std::array<double, 3> classify_pair(const ModelParams& params,
                                    std::span<const double> x_i,
                                    std::span<const double> x_j) {
  const PairTerms t = forward_pair(params, x_i, x_j, Outcome::kTie);
  return softmax(t.logits);
}

BackwardResult backward(const ModelParams& params,
                        std::span<const TrainingExample> batch,
                        const Hyperparams& hyper) {
  if (batch.empty()) throw Error("backward requires a non-empty batch");
  const auto& L = params.layout;
  const std::size_t h = params.arch.embedding_dim();
  BackwardResult out;
  out.gradient.assign(L.total, 0.0);
  std::vector<PairTerms> terms;
  terms.reserve(batch.size());
  const double scale = 1.0 / static_cast<double>(batch.size());

  for (const TrainingExample& ex : batch) {
    check_input(params, ex.x_i);
    check_input(params, ex.x_j);
    ChainCache trunk_i, trunk_j, rank_i, rank_j, fusion;
    const auto e_i = forward_chain(params.values, L.trunk, ex.x_i, true,
                                   &trunk_i);
    const auto e_j = forward_chain(params.values, L.trunk, ex.x_j, true,
                                   &trunk_j);
    PairTerms t;
    t.y = ex.y;
    t.f_i = forward_chain(params.values, L.rank_head, e_i, false, &rank_i)[0];
    t.f_j = forward_chain(params.values, L.rank_head, e_j, false, &rank_j)[0];
    const auto logits = forward_chain(params.values, L.fusion_head,
                                      concat(e_i, e_j), false, &fusion);
    std::copy(logits.begin(), logits.end(), t.logits.begin());
    terms.push_back(t);

    const PairLossGrad g = pair_loss_grad(t, hyper);
    std::vector<double> d_ei(h, 0.0);
    std::vector<double> d_ej(h, 0.0);
    if (g.d_fi != 0.0) {
      d_ei = backward_chain(params.values, L.rank_head, rank_i, false,
                            {g.d_fi * scale}, out.gradient);
      d_ej = backward_chain(params.values, L.rank_head, rank_j, false,
                            {g.d_fj * scale}, out.gradient);
    }
    if (hyper.lambda_class > 0.0) {
      std::vector<double> d_logits(3);
      for (int k = 0; k < 3; ++k) d_logits[k] = g.d_logits[k] * scale;
      const auto d_cat = backward_chain(params.values, L.fusion_head, fusion,
                                        false, d_logits, out.gradient);
      for (std::size_t k = 0; k < h; ++k) {
        d_ei[k] += d_cat[k];
        d_ej[k] += d_cat[h + k];
      }
    }
    // Both branches write into the same trunk parameter block.
    backward_chain(params.values, L.trunk, trunk_i, true, std::move(d_ei),
                   out.gradient);
    backward_chain(params.values, L.trunk, trunk_j, true, std::move(d_ej),
                   out.gradient);
  }
  out.loss = combined_loss(terms, hyper);
  return out;
}

double effective_learning_rate(const Hyperparams& hyper, std::int64_t step) {
  const auto decays = step / hyper.decay_every_steps;
  return hyper.learning_rate *
         std::pow(hyper.decay_factor, static_cast<double>(decays));
}

void adam_step(ModelParams& params, std::span<const double> gradient) {
  const std::size_t n = params.values.size();
  if (gradient.size() != n || params.adam.m.size() != n ||
      params.adam.v.size() != n) {
    throw Error("adam_step: shape mismatch");
  }
  const double lr = effective_learning_rate(params.hyper, params.adam.step);
  const double t = static_cast<double>(params.adam.step + 1);
  const double bc1 = 1.0 - std::pow(kBeta1, t);
  const double bc2 = 1.0 - std::pow(kBeta2, t);
  for (std::size_t k = 0; k < n; ++k) {
    const double g = gradient[k];
    double& m = params.adam.m[k];
    double& v = params.adam.v[k];
    m = kBeta1 * m + (1.0 - kBeta1) * g;
    v = kBeta2 * v + (1.0 - kBeta2) * g * g;
    const double m_hat = m / bc1;
    const double v_hat = v / bc2;
    params.values[k] -= lr * m_hat / (std::sqrt(v_hat) + kAdamEps);
  }
  ++params.adam.step;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

using nlohmann::json;

constexpr int kCheckpointVersion = 1;

json hyper_to_json(const Hyperparams& h) {
  return json{{"gamma", h.gamma},
              {"lambda_rank", h.lambda_rank},
              {"lambda_tie", h.lambda_tie},
              {"lambda_class", h.lambda_class},
              {"learning_rate", h.learning_rate},
              {"decay_every_steps", h.decay_every_steps},
              {"decay_factor", h.decay_factor},
              {"batch_size", h.batch_size},
              {"max_epochs", h.max_epochs},
              {"seed", h.seed}};
}

Hyperparams hyper_from_json(const json& j) {
  Hyperparams h;
  h.gamma = j.at("gamma").get<double>();
  h.lambda_rank = j.at("lambda_rank").get<double>();
  h.lambda_tie = j.at("lambda_tie").get<double>();
  h.lambda_class = j.at("lambda_class").get<double>();
  h.learning_rate = j.at("learning_rate").get<double>();
  h.decay_every_steps = j.at("decay_every_steps").get<std::int64_t>();
  h.decay_factor = j.at("decay_factor").get<double>();
  h.batch_size = j.at("batch_size").get<std::int64_t>();
  h.max_epochs = j.at("max_epochs").get<std::int64_t>();
  h.seed = j.at("seed").get<std::uint64_t>();
  return h;
}

json layers_to_json(const char* block, const std::vector<DenseLayer>& layers,
                    const std::vector<double>& values) {
  json out = json::array();
  for (const DenseLayer& layer : layers) {
    const auto w0 = values.begin() + static_cast<std::ptrdiff_t>(layer.offset);
    const auto b0 =
        values.begin() + static_cast<std::ptrdiff_t>(layer.bias_offset());
    out.push_back(json{
        {"block", block},
        {"in", layer.in},
        {"out", layer.out},
        {"weights", std::vector<double>(
                        w0, w0 + static_cast<std::ptrdiff_t>(layer.weight_count()))},
        {"bias",
         std::vector<double>(b0, b0 + static_cast<std::ptrdiff_t>(layer.out))}});
  }
  return out;
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  const ModelParams& p = ckpt.params;
  json layers = json::array();
  for (auto& l : layers_to_json("trunk", p.layout.trunk, p.values)) {
    layers.push_back(std::move(l));
  }
  for (auto& l : layers_to_json("rank_head", p.layout.rank_head, p.values)) {
    layers.push_back(std::move(l));
  }
  for (auto& l :
       layers_to_json("fusion_head", p.layout.fusion_head, p.values)) {
    layers.push_back(std::move(l));
  }
  json doc{{"format", "pcs-checkpoint"},
           {"version", kCheckpointVersion},
           {"architecture",
            {{"input_dim", p.arch.input_dim},
             {"trunk_widths", p.arch.trunk_widths},
             {"fusion_widths", p.arch.fusion_widths}}},
           {"class_index", {{"left", 0}, {"tie", 1}, {"right", 2}}},
           {"layers", std::move(layers)},
           {"hyper", hyper_to_json(p.hyper)},
           {"seed", p.hyper.seed},
           {"adam", {{"step", p.adam.step}, {"m", p.adam.m}, {"v", p.adam.v}}}};
  if (ckpt.standardization) {
    doc["standardization"] = {{"mean", ckpt.standardization->mean},
                              {"stddev", ckpt.standardization->stddev}};
  }
  return doc.dump();
}

Checkpoint checkpoint_from_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    if (doc.at("format") != "pcs-checkpoint") {
      throw Error("not a pcs checkpoint");
    }
    if (doc.at("version").get<int>() != kCheckpointVersion) {
      throw Error("unsupported checkpoint version " +
                  doc.at("version").dump());
    }
    Checkpoint ckpt;
    ModelParams& p = ckpt.params;
    const json& a = doc.at("architecture");
    p.arch.input_dim = a.at("input_dim").get<std::size_t>();
    p.arch.trunk_widths = a.at("trunk_widths").get<std::vector<std::size_t>>();
    p.arch.fusion_widths =
        a.at("fusion_widths").get<std::vector<std::size_t>>();
    p.layout = make_layout(p.arch);
    p.values.assign(p.layout.total, 0.0);

    std::vector<DenseLayer> all;
    for (const auto* block :
         {&p.layout.trunk, &p.layout.rank_head, &p.layout.fusion_head}) {
      all.insert(all.end(), block->begin(), block->end());
    }
    const json& layers = doc.at("layers");
    if (layers.size() != all.size()) {
      throw Error("checkpoint layer count does not match architecture");
    }
    for (std::size_t k = 0; k < all.size(); ++k) {
      const DenseLayer& layer = all[k];
      const auto w = layers[k].at("weights").get<std::vector<double>>();
      const auto b = layers[k].at("bias").get<std::vector<double>>();
      if (layers[k].at("in").get<std::size_t>() != layer.in ||
          layers[k].at("out").get<std::size_t>() != layer.out ||
          w.size() != layer.weight_count() || b.size() != layer.out) {
        throw Error("checkpoint layer " + std::to_string(k) +
                    " has inconsistent shape");
      }
      std::copy(w.begin(), w.end(),
                p.values.begin() + static_cast<std::ptrdiff_t>(layer.offset));
      std::copy(b.begin(), b.end(),
                p.values.begin() +
                    static_cast<std::ptrdiff_t>(layer.bias_offset()));
    }
    p.hyper = hyper_from_json(doc.at("hyper"));
    const json& adam = doc.at("adam");
    p.adam.step = adam.at("step").get<std::int64_t>();
    p.adam.m = adam.at("m").get<std::vector<double>>();
    p.adam.v = adam.at("v").get<std::vector<double>>();
    if (p.adam.m.size() != p.layout.total ||
        p.adam.v.size() != p.layout.total) {
      throw Error("checkpoint optimizer state has inconsistent shape");
    }
    if (doc.contains("standardization")) {
      Standardization s;
      s.mean = doc["standardization"].at("mean").get<std::vector<double>>();
      s.stddev =
          doc["standardization"].at("stddev").get<std::vector<double>>();
      if (s.mean.size() != p.arch.input_dim ||
          s.stddev.size() != p.arch.input_dim) {
        throw Error("checkpoint standardization has wrong dimension");
      }
      ckpt.standardization = std::move(s);
    }
    return ckpt;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << checkpoint_to_json(ckpt) << '\n';
  if (!out) throw Error("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open checkpoint '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return checkpoint_from_json(buffer.str());
}

}  // namespace pcs
