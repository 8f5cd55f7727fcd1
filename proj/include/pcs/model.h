#ifndef PCS_MODEL_H_
#define PCS_MODEL_H_

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcs/core.h"
#include "pcs/hyperparams.h"
#include "pcs/losses.h"

namespace pcs {

// Dimension chain of the scorer:
//   trunk:       input_dim -> trunk_widths... (ReLU after every layer),
//                shared by both sides of a pair
//   rank head:   embedding -> 1 (linear)
//   fusion head: [embedding_i, embedding_j] -> fusion_widths... (ReLU) -> 3
struct Architecture {
  std::size_t input_dim = 0;
  std::vector<std::size_t> trunk_widths{64, 64};
  std::vector<std::size_t> fusion_widths{64};

  std::size_t embedding_dim() const { return trunk_widths.back(); }
  void validate() const;
  bool operator==(const Architecture&) const = default;
};

// Location of one dense layer inside the flat parameter vector. Weights are
// stored row-major (out x in) followed by the bias.
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t offset = 0;

  std::size_t weight_count() const { return in * out; }
  std::size_t bias_offset() const { return offset + weight_count(); }
  std::size_t size() const { return weight_count() + out; }
};

struct ParamLayout {
  std::vector<DenseLayer> trunk;
  std::vector<DenseLayer> rank_head;
  std::vector<DenseLayer> fusion_head;
  std::size_t total = 0;
};

ParamLayout make_layout(const Architecture& arch);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
};

struct ModelParams {
  Architecture arch;
  ParamLayout layout;
  std::vector<double> values;
  Hyperparams hyper;
  AdamState adam;
};

// Weights ~ Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases 0.
ModelParams init_params(const Architecture& arch, std::uint64_t seed,
                        const Hyperparams& hyper = {});

double rank_score(const ModelParams& params, std::span<const double> x);

// (p_left, p_tie, p_right).
std::array<double, 3> classify_pair(const ModelParams& params,
                                    std::span<const double> x_i,
                                    std::span<const double> x_j);

PairTerms forward_pair(const ModelParams& params, std::span<const double> x_i,
                       std::span<const double> x_j, Outcome y);

struct TrainingExample {
  std::span<const double> x_i;
  std::span<const double> x_j;
  Outcome y = Outcome::kTie;
};

struct BackwardResult {
  std::vector<double> gradient;  // same layout as ModelParams::values
  LossBreakdown loss;
};

// Gradient of the batch-mean multi-loss. Accumulation order is the batch
// order, so results are reproducible bit for bit.
BackwardResult backward(const ModelParams& params,
                        std::span<const TrainingExample> batch,
                        const Hyperparams& hyper);

// learning_rate * decay_factor^floor(step / decay_every_steps).
double effective_learning_rate(const Hyperparams& hyper, std::int64_t step);

// One Adam update (beta1 0.9, beta2 0.999, eps 1e-8) using params.hyper.
void adam_step(ModelParams& params, std::span<const double> gradient);

// Per-dimension z-score statistics captured when items were loaded.
struct Standardization {
  std::vector<double> mean;
  std::vector<double> stddev;
};

struct Checkpoint {
  ModelParams params;
  std::optional<Standardization> standardization;
};

std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const std::string& text);
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace pcs

#endif  // PCS_MODEL_H_
