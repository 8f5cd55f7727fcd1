#ifndef PCS_TRAINER_H_
#define PCS_TRAINER_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcs/core.h"
#include "pcs/losses.h"
#include "pcs/metrics.h"
#include "pcs/model.h"

namespace pcs {

struct TrainConfig {
  Hyperparams hyper;
  // input_dim 0 means "take it from the item catalog".
  Architecture arch;
  bool use_ties = true;
  bool use_classification_head = true;
  bool swap_augmentation = true;
  std::int64_t patience = 3;

  void validate() const;
};

struct EpochRecord {
  std::int64_t epoch = 0;
  LossBreakdown train_loss;
  std::optional<double> dev_accuracy2;
  std::optional<double> dev_accuracy3;
  double learning_rate = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::int64_t best_epoch = 0;
};

struct TrainResult {
  ModelParams params;
  TrainHistory history;
};

// Mini-batch Adam over the training comparisons. Returns the parameters of
// the epoch with the best dev 2-class accuracy (earliest on ties) and stops
// after `patience` epochs without improvement.
TrainResult train(const Dataset& train_set, const Dataset& dev_set,
                  const TrainConfig& config);

std::string history_to_csv(const TrainHistory& history);

// JSON form: {"hyper": {...}, "arch": {"trunk_widths", "fusion_widths"},
// "use_ties", "use_classification_head", "swap_augmentation", "patience"}.
// Missing keys keep the values of `base`.
TrainConfig train_config_from_json(const std::string& text,
                                   const TrainConfig& base = {});
std::string train_config_to_json(const TrainConfig& config);

struct GammaSweepRow {
  double gamma = 0.0;
  EvalReport report;
};

// One full training per gamma (ascending), each evaluated on `test`.
std::vector<GammaSweepRow> sweep_gamma(const Dataset& train_set,
                                       const Dataset& dev_set,
                                       const Dataset& test_set,
                                       std::span<const double> gammas,
                                       const TrainConfig& config);

std::string sweep_to_csv(std::span<const GammaSweepRow> rows);

// All real comparisons plus round(ratio * |real|) synthetic ones sampled
// without replacement. Item ids are prefixed "real:" and "syn:".
Dataset mix_datasets(const Dataset& real, const Dataset& synthetic,
                     double ratio, std::uint64_t seed);

}  // namespace pcs

#endif  // PCS_TRAINER_H_
