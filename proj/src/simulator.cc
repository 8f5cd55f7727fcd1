#include "pcs/simulator.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "pcs/baselines.h"
#include "pcs/metrics.h"
#include "pcs/random.h"

namespace pcs {

void SimConfig::validate() const {
  if (n_items < 2) throw Error("simulator: n_items must be >= 2");
  if (feature_dim == 0) throw Error("simulator: feature_dim must be > 0");
  if (!(avg_comparisons_per_item > 0.0)) {
    throw Error("simulator: avg_comparisons_per_item must be > 0");
  }
  if (!(tie_bandwidth >= 0.0)) {
    throw Error("simulator: tie_bandwidth must be >= 0");
  }
  if (!(respondent_noise >= 0.0)) {
    throw Error("simulator: respondent_noise must be >= 0");
  }
  if (generator == Generator::kMlp && mlp_hidden == 0) {
    throw Error("simulator: mlp_hidden must be > 0");
  }
  if (outcome_model == OutcomeModel::kRaoKupper && !(rao_kupper_theta >= 1.0)) {
    throw Error("simulator: rao_kupper_theta must be >= 1");
  }
}

double SimWorld::true_score(std::span<const double> x) const {
  if (generator == Generator::kLinear) {
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) s += hidden_weights[k] * x[k];
    return s;
  }
  const std::size_t d = x.size();
  double s = 0.0;
  for (std::size_t h = 0; h < output_weights.size(); ++h) {
    double z = 0.0;
    for (std::size_t k = 0; k < d; ++k) z += hidden_weights[h * d + k] * x[k];
    s += output_weights[h] * std::tanh(z);
  }
  return s;
}

SimWorld gen_world(const SimConfig& config) {
  config.validate();
  Rng rng(derive_seed(config.seed, 0));
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t d = config.feature_dim;

  SimWorld world;
  world.generator = config.generator;
  if (config.generator == Generator::kLinear) {
    world.hidden_weights.resize(d);
    double norm = 0.0;
    for (double& w : world.hidden_weights) {
      w = normal(rng);
      norm += w * w;
    }
    norm = std::sqrt(norm);
    for (double& w : world.hidden_weights) w /= norm;
  } else {
    const std::size_t h = config.mlp_hidden;
    world.hidden_weights.resize(h * d);
    for (double& w : world.hidden_weights) {
      w = normal(rng) / std::sqrt(static_cast<double>(d));
    }
    world.output_weights.resize(h);
    for (double& w : world.output_weights) {
      w = normal(rng) * std::sqrt(2.0 / static_cast<double>(h));
    }
  }

  std::vector<Item> items(config.n_items);
  const std::size_t n_attr = std::min<std::size_t>(d, 12);
  for (std::size_t i = 0; i < config.n_items; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "item-%05zu", i);
    items[i].id = id;
    items[i].features.resize(d);
    for (double& v : items[i].features) v = normal(rng);
    for (std::size_t k = 0; k < n_attr; ++k) {
      items[i].attributes["attr_" + std::to_string(k)] =
          items[i].features[k] > 0.0 ? 1.0 : 0.0;
    }
  }
  world.true_scores.reserve(items.size());
  for (const Item& it : items) {
    world.true_scores.push_back(world.true_score(it.features));
  }
  world.items = std::make_shared<const ItemCatalog>(std::move(items));
  return world;
}

std::size_t comparison_budget(double avg_comparisons_per_item,
                              std::size_t n_items) {
  return static_cast<std::size_t>(
      std::llround(avg_comparisons_per_item * static_cast<double>(n_items) / 2.0));
}

std::vector<Comparison> gen_comparisons(const SimWorld& world,
                                        const SimConfig& config) {
  config.validate();
  const std::size_t n = world.items->size();
  if (n < 2) throw Error("gen_comparisons requires at least 2 items");
  Rng rng(derive_seed(config.seed, 1));
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  std::uniform_int_distribution<std::size_t> second(0, n - 2);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const std::size_t count = comparison_budget(config.avg_comparisons_per_item, n);
  std::vector<Comparison> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t i = first(rng);
    std::size_t j = second(rng);
    if (j >= i) ++j;
    Comparison c;
    c.left_id = (*world.items)[i].id;
    c.right_id = (*world.items)[j].id;
    c.respondent_id = "sim";
    c.created_at = static_cast<std::int64_t>(k);
    if (config.outcome_model == OutcomeModel::kThreshold) {
      double si = world.true_scores[i];
      double sj = world.true_scores[j];
      if (config.respondent_noise > 0.0) {
        si += config.respondent_noise * noise(rng);
        sj += config.respondent_noise * noise(rng);
      }
      if (std::abs(si - sj) < config.tie_bandwidth) {
        c.outcome = Outcome::kTie;
      } else {
        c.outcome = si > sj ? Outcome::kLeft : Outcome::kRight;
      }
    } else {
      const auto p = rao_kupper_probabilities(std::exp(world.true_scores[i]),
                                              std::exp(world.true_scores[j]),
                                              config.rao_kupper_theta);
      const double u = unit(rng);
      c.outcome = u < p.i_wins            ? Outcome::kLeft
                  : u < p.i_wins + p.tie  ? Outcome::kTie
                                          : Outcome::kRight;
    }
    out.push_back(std::move(c));
  }
  return out;
}

// ---------------------------------------------------- budget experiment

namespace {

struct Cell {
  std::size_t budget_index;
  std::size_t seed_index;
};

std::vector<BudgetRow> run_cell(const BudgetGrid& grid, const Cell& cell) {
  const double budget = grid.budgets[cell.budget_index];
  SimConfig world_cfg = grid.base;
  world_cfg.seed = derive_seed(grid.base.seed, cell.seed_index);
  const SimWorld world = gen_world(world_cfg);

  SimConfig cmp_cfg = world_cfg;
  cmp_cfg.avg_comparisons_per_item = budget;
  cmp_cfg.seed = derive_seed(world_cfg.seed, 100 + cell.budget_index);
  std::vector<Comparison> comparisons = gen_comparisons(world, cmp_cfg);
  const std::size_t ties = static_cast<std::size_t>(
      std::count_if(comparisons.begin(), comparisons.end(),
                    [](const Comparison& c) { return is_tie(c.outcome); }));
  const double tie_fraction =
      comparisons.empty() ? 0.0
                          : static_cast<double>(ties) /
                                static_cast<double>(comparisons.size());

  const Dataset dataset = make_dataset(world.items, std::move(comparisons));
  SplitSpec split_spec = grid.split;
  split_spec.seed = derive_seed(world_cfg.seed, 200 + cell.budget_index);
  const SplitResult parts = split(dataset, split_spec);

  std::vector<BudgetRow> rows;
  for (const std::string& method : grid.methods) {
    BudgetRow row;
    row.avg_comparisons = budget;
    row.method = method;
    row.seed = cell.seed_index;
    row.tie_fraction = tie_fraction;
    std::vector<ScoredPair> scored;
    double gamma = 0.0;
    if (method == kPcsMethod) {
      TrainConfig tc = grid.pcs;
      tc.hyper.seed = derive_seed(world_cfg.seed, 300 + cell.budget_index);
      const TrainResult fit = train(parts.train, parts.dev, tc);
      scored = score_pairs(fit.params, *world.items, parts.test.comparisons);
      gamma = tc.hyper.gamma;
    } else {
      const ScoreTable table = fit_baseline(parse_baseline_method(method),
                                            parts.train.comparisons);
      scored = score_pairs(table, parts.test.comparisons);
    }
    const bool has_nontie = std::any_of(
        scored.begin(), scored.end(),
        [](const ScoredPair& p) { return !is_tie(p.y); });
    if (has_nontie) row.accuracy2 = accuracy_2class(scored);
    row.accuracy3 = accuracy_3class(scored, gamma);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::vector<BudgetRow> run_budget_experiment(const BudgetGrid& grid) {
  grid.base.validate();
  if (grid.budgets.empty()) throw Error("budget grid has no budgets");
  if (grid.methods.empty()) throw Error("budget grid has no methods");
  if (grid.n_seeds == 0) throw Error("budget grid needs at least one seed");
  for (const std::string& m : grid.methods) {
    if (m != kPcsMethod) parse_baseline_method(m);
  }
  for (double b : grid.budgets) {
    if (!(b > 0.0)) throw Error("budgets must be > 0");
  }

  std::vector<Cell> cells;
  for (std::size_t b = 0; b < grid.budgets.size(); ++b) {
    for (std::size_t s = 0; s < grid.n_seeds; ++s) cells.push_back({b, s});
  }
  std::vector<std::vector<BudgetRow>> results(cells.size());
  std::vector<std::exception_ptr> errors(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < cells.size(); k = next++) {
      try {
        results[k] = run_cell(grid, cells[k]);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads =
      std::max<std::size_t>(1, std::min(grid.threads, cells.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<BudgetRow> rows;
  for (auto& r : results) {
    for (auto& row : r) rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<BudgetSummary> summarize(std::span<const BudgetRow> rows) {
  std::map<std::pair<double, std::string>, std::vector<double>> groups;
  std::vector<std::pair<double, std::string>> order;
  for (const BudgetRow& r : rows) {
    const auto key = std::make_pair(r.avg_comparisons, r.method);
    if (!groups.count(key)) order.push_back(key);
    if (r.accuracy2) groups[key].push_back(*r.accuracy2);
    else groups[key];
  }
  std::vector<BudgetSummary> out;
  for (const auto& key : order) {
    const auto& v = groups[key];
    BudgetSummary s;
    s.avg_comparisons = key.first;
    s.method = key.second;
    s.n = v.size();
    if (!v.empty()) {
      double sum = 0.0;
      for (double a : v) sum += a;
      s.mean_accuracy2 = sum / static_cast<double>(v.size());
      double ss = 0.0;
      for (double a : v) ss += (a - s.mean_accuracy2) * (a - s.mean_accuracy2);
      s.stddev_accuracy2 =
          v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    }
    out.push_back(s);
  }
  return out;
}

std::string budget_rows_to_csv(std::span<const BudgetRow> rows) {
  std::ostringstream out;
  out.precision(17);
  out << "avg_comparisons,method,seed,accuracy2,accuracy3,tie_fraction\n";
  for (const BudgetRow& r : rows) {
    out << r.avg_comparisons << ',' << r.method << ',' << r.seed << ',';
    if (r.accuracy2) out << *r.accuracy2;
    out << ',' << r.accuracy3 << ',' << r.tie_fraction << '\n';
  }
  return out.str();
}

TrainConfig default_simulation_train_config() {
  // A few hundred training pairs per world: small batches and more epochs
  // give the optimizer enough steps.
  TrainConfig tc;
  tc.hyper.batch_size = 16;
  tc.hyper.max_epochs = 200;
  tc.hyper.learning_rate = 0.003;
  tc.patience = 20;
  return tc;
}

BudgetGrid budget_grid_from_json(const std::string& text) {
  using nlohmann::json;
  BudgetGrid grid;
  grid.pcs = default_simulation_train_config();
  try {
    const json doc = json::parse(text);
    if (doc.contains("world")) {
      const json& w = doc["world"];
      SimConfig& s = grid.base;
      s.n_items = w.value("n_items", s.n_items);
      s.feature_dim = w.value("feature_dim", s.feature_dim);
      s.tie_bandwidth = w.value("tie_bandwidth", s.tie_bandwidth);
      s.respondent_noise = w.value("respondent_noise", s.respondent_noise);
      s.mlp_hidden = w.value("mlp_hidden", s.mlp_hidden);
      s.seed = w.value("seed", s.seed);
      const std::string gen = w.value("generator", std::string("linear"));
      if (gen == "linear") s.generator = Generator::kLinear;
      else if (gen == "mlp") s.generator = Generator::kMlp;
      else throw Error("unknown generator '" + gen + "'");
      const std::string om = w.value("outcome_model", std::string("threshold"));
      if (om == "threshold") s.outcome_model = OutcomeModel::kThreshold;
      else if (om == "rao_kupper") s.outcome_model = OutcomeModel::kRaoKupper;
      else throw Error("unknown outcome_model '" + om + "'");
      s.rao_kupper_theta = w.value("rao_kupper_theta", s.rao_kupper_theta);
    }
    grid.budgets = doc.value("budgets", grid.budgets);
    grid.methods = doc.value("methods", grid.methods);
    grid.n_seeds = doc.value("n_seeds", grid.n_seeds);
    grid.threads = doc.value("threads", grid.threads);
    if (doc.contains("split")) {
      const json& sp = doc["split"];
      grid.split.train = sp.value("train", grid.split.train);
      grid.split.dev = sp.value("dev", grid.split.dev);
      grid.split.test = sp.value("test", grid.split.test);
    }
    if (doc.contains("train")) {
      grid.pcs = train_config_from_json(doc["train"].dump(), grid.pcs);
    }
  } catch (const json::exception& e) {
    throw Error(std::string("malformed simulation grid: ") + e.what());
  }
  grid.base.validate();
  for (const std::string& m : grid.methods) {
    if (m != kPcsMethod) parse_baseline_method(m);
  }
  return grid;
}

}  // namespace pcs
