#ifndef PCS_SIMULATOR_H_
#define PCS_SIMULATOR_H_

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcs/core.h"
#include "pcs/trainer.h"

namespace pcs {

enum class Generator { kLinear, kMlp };

// How a noisy perceived difference becomes an outcome.
enum class OutcomeModel {
  kThreshold,  // tie iff |perceived difference| < tie_bandwidth
  kRaoKupper,  // sample from Rao-Kupper with pi = exp(true score)
};

struct SimConfig {
  std::size_t n_items = 200;
  std::size_t feature_dim = 16;
  double avg_comparisons_per_item = 3.3;
  double tie_bandwidth = 0.3;
  double respondent_noise = 0.2;
  Generator generator = Generator::kLinear;
  std::size_t mlp_hidden = 16;
  OutcomeModel outcome_model = OutcomeModel::kThreshold;
  double rao_kupper_theta = 1.5;
  std::uint64_t seed = 0;

  void validate() const;
};

// Synthetic ground truth: items with standard-normal features and a hidden
// scorer producing their true latent scores.
struct SimWorld {
  std::shared_ptr<const ItemCatalog> items;
  std::vector<double> true_scores;  // aligned with items
  Generator generator = Generator::kLinear;
  // Linear: unit-norm weights (D). MLP: hidden weights (H x D), then output
  // weights (H).
  std::vector<double> hidden_weights;
  std::vector<double> output_weights;

  double true_score(std::span<const double> x) const;
};

SimWorld gen_world(const SimConfig& config);

// round(avg * n / 2): every comparison exposes two items.
std::size_t comparison_budget(double avg_comparisons_per_item,
                              std::size_t n_items);

std::vector<Comparison> gen_comparisons(const SimWorld& world,
                                        const SimConfig& config);

inline constexpr const char* kPcsMethod = "pcs";

// Trainer settings for the small synthetic worlds.
TrainConfig default_simulation_train_config();

struct BudgetGrid {
  SimConfig base;
  std::vector<double> budgets{1.0, 2.0, 3.3};
  std::vector<std::string> methods{kPcsMethod, "elo", "skill",
                                   "rank_centrality", "rao_kupper"};
  std::size_t n_seeds = 5;
  TrainConfig pcs = default_simulation_train_config();
  SplitSpec split;
  std::size_t threads = 1;
};

struct BudgetRow {
  double avg_comparisons = 0.0;
  std::string method;
  std::size_t seed = 0;
  std::optional<double> accuracy2;
  double accuracy3 = 0.0;
  double tie_fraction = 0.0;
};

struct BudgetSummary {
  double avg_comparisons = 0.0;
  std::string method;
  double mean_accuracy2 = 0.0;
  double stddev_accuracy2 = 0.0;
  std::size_t n = 0;
};

// For every budget and seed: one world, one comparison set and one 70-10-20
// split shared by all methods; each method is fit on train and scored on
// test. Rows are ordered by (budget, seed, method) regardless of threading.
std::vector<BudgetRow> run_budget_experiment(const BudgetGrid& grid);

std::vector<BudgetSummary> summarize(std::span<const BudgetRow> rows);

std::string budget_rows_to_csv(std::span<const BudgetRow> rows);

// Parses the JSON grid accepted by `pcs simulate`.
BudgetGrid budget_grid_from_json(const std::string& text);

}  // namespace pcs

#endif  // PCS_SIMULATOR_H_
