#include "pcs/trainer.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pcs/random.h"

namespace pcs {
namespace {

struct IndexedExample {
  std::size_t i;
  std::size_t j;
  Outcome y;
};

std::string fmt_opt(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream s;
  s.precision(17);
  s << *v;
  return s.str();
}

// Dev metric used for model selection; falls back to 3-class accuracy when
// the dev set has no non-tie comparisons.
std::optional<double> selection_metric(const EpochRecord& r) {
  return r.dev_accuracy2 ? r.dev_accuracy2 : r.dev_accuracy3;
}

}  // namespace

void TrainConfig::validate() const {
  hyper.validate();
  if (patience < 1) throw Error("patience must be >= 1");
}

TrainResult train(const Dataset& train_set, const Dataset& dev_set,
                  const TrainConfig& config) {
  config.validate();
  if (!train_set.items) throw Error("train: dataset has no item catalog");
  Hyperparams hyper = config.hyper;
  if (!config.use_classification_head) hyper.lambda_class = 0.0;

  const ItemCatalog& catalog = train_set.catalog();
  Architecture arch = config.arch;
  if (arch.input_dim == 0) arch.input_dim = catalog.feature_dim();
  if (arch.input_dim != catalog.feature_dim()) {
    throw Error("train: architecture input_dim does not match features");
  }

  std::vector<IndexedExample> examples;
  examples.reserve(train_set.comparisons.size());
  for (const Comparison& c : train_set.comparisons) {
    if (!config.use_ties && is_tie(c.outcome)) continue;
    examples.push_back(
        {catalog.index_of(c.left_id), catalog.index_of(c.right_id), c.outcome});
  }
  if (examples.empty()) {
    throw Error("train: empty effective training set" +
                std::string(config.use_ties ? "" : " (ties excluded)"));
  }

  TrainResult result;
  ModelParams params = init_params(arch, hyper.seed, hyper);
  ModelParams best = params;
  std::optional<double> best_metric;

  Rng rng(derive_seed(hyper.seed, 1));
  std::bernoulli_distribution coin(0.5);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch_size = static_cast<std::size_t>(hyper.batch_size);

  std::vector<TrainingExample> batch;
  batch.reserve(batch_size);
  for (std::int64_t epoch = 1; epoch <= hyper.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    LossBreakdown sum;
    double last_lr = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t stop = std::min(order.size(), start + batch_size);
      batch.clear();
      for (std::size_t k = start; k < stop; ++k) {
        const IndexedExample& ex = examples[order[k]];
        TrainingExample te{catalog[ex.i].features, catalog[ex.j].features,
                           ex.y};
        if (config.swap_augmentation && coin(rng)) {
          std::swap(te.x_i, te.x_j);
          te.y = negate(te.y);
        }
        batch.push_back(te);
      }
      const BackwardResult br = backward(params, batch, hyper);
      last_lr = effective_learning_rate(hyper, params.adam.step);
      adam_step(params, br.gradient);
      const double w = static_cast<double>(batch.size());
      sum.total += br.loss.total * w;
      sum.classification += br.loss.classification * w;
      sum.ranking += br.loss.ranking * w;
      sum.tie += br.loss.tie * w;
      sum.n_nontie += br.loss.n_nontie;
      sum.n_tie += br.loss.n_tie;
    }
    const double n = static_cast<double>(examples.size());
    EpochRecord rec;
    rec.epoch = epoch;
    rec.learning_rate = last_lr;
    rec.train_loss = sum;
    rec.train_loss.total /= n;
    rec.train_loss.classification /= n;
    rec.train_loss.ranking /= n;
    rec.train_loss.tie /= n;
    if (sum.n_nontie > 0) {
      rec.train_loss.ranking_class_mean =
          rec.train_loss.ranking * n / static_cast<double>(sum.n_nontie);
    }
    if (sum.n_tie > 0) {
      rec.train_loss.tie_class_mean =
          rec.train_loss.tie * n / static_cast<double>(sum.n_tie);
    }

    if (!dev_set.comparisons.empty()) {
      const auto scored =
          score_pairs(params, dev_set.catalog(), dev_set.comparisons);
      const bool has_nontie =
          std::any_of(scored.begin(), scored.end(),
                      [](const ScoredPair& p) { return !is_tie(p.y); });
      if (has_nontie) rec.dev_accuracy2 = accuracy_2class(scored);
      rec.dev_accuracy3 = accuracy_3class(scored, hyper.gamma);
    }
    result.history.epochs.push_back(rec);

    const auto metric = selection_metric(rec);
    if (!metric) {
      best = params;
      result.history.best_epoch = epoch;
      continue;
    }
    if (!best_metric || *metric > *best_metric) {
      best_metric = metric;
      best = params;
      result.history.best_epoch = epoch;
    } else if (epoch - result.history.best_epoch >= config.patience) {
      break;
    }
  }
  result.params = std::move(best);
  return result;
}

std::string history_to_csv(const TrainHistory& history) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,loss_total,loss_classification,loss_ranking,loss_tie,"
         "dev_accuracy2,dev_accuracy3,learning_rate\n";
  for (const EpochRecord& r : history.epochs) {
    out << r.epoch << ',' << r.train_loss.total << ','
        << r.train_loss.classification << ',' << r.train_loss.ranking << ','
        << r.train_loss.tie << ',' << fmt_opt(r.dev_accuracy2) << ','
        << fmt_opt(r.dev_accuracy3) << ',' << r.learning_rate << '\n';
  }
  return out.str();
}

std::vector<GammaSweepRow> sweep_gamma(const Dataset& train_set,
                                       const Dataset& dev_set,
                                       const Dataset& test_set,
                                       std::span<const double> gammas,
                                       const TrainConfig& config) {
  if (gammas.empty()) throw Error("sweep_gamma: no gamma values");
  if (!std::is_sorted(gammas.begin(), gammas.end())) {
    throw Error("sweep_gamma: gamma values must be ascending");
  }
  if (test_set.comparisons.empty()) throw Error("sweep_gamma: empty test set");
  std::vector<GammaSweepRow> rows;
  for (double gamma : gammas) {
    TrainConfig cfg = config;
    cfg.hyper.gamma = gamma;
    const TrainResult fit = train(train_set, dev_set, cfg);
    const auto scored =
        score_pairs(fit.params, test_set.catalog(), test_set.comparisons);
    rows.push_back({gamma, evaluate(scored, gamma)});
  }
  return rows;
}

std::string sweep_to_csv(std::span<const GammaSweepRow> rows) {
  std::ostringstream out;
  out.precision(17);
  out << "gamma,accuracy2,accuracy3,tie_recall,mean_misclassified_loss,"
         "n_misclassified\n";
  for (const GammaSweepRow& r : rows) {
    out << r.gamma << ',' << fmt_opt(r.report.accuracy2) << ','
        << r.report.accuracy3 << ',' << fmt_opt(r.report.tie_recall) << ','
        << fmt_opt(r.report.mean_misclassified_loss) << ','
        << r.report.n_misclassified << '\n';
  }
  return out.str();
}

Dataset mix_datasets(const Dataset& real, const Dataset& synthetic,
                     double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0) || !std::isfinite(ratio)) {
    throw Error("mix_datasets: ratio must be > 0");
  }
  const auto wanted = static_cast<std::size_t>(
      std::llround(ratio * static_cast<double>(real.comparisons.size())));
  if (wanted > synthetic.comparisons.size()) {
    throw Error("mix_datasets: synthetic set has " +
                std::to_string(synthetic.comparisons.size()) +
                " comparisons, " + std::to_string(wanted) + " requested");
  }
  std::vector<Item> items;
  items.reserve(real.catalog().size() + synthetic.catalog().size());
  for (const Item& it : real.catalog().items()) {
    items.push_back(it);
    items.back().id = "real:" + it.id;
  }
  for (const Item& it : synthetic.catalog().items()) {
    items.push_back(it);
    items.back().id = "syn:" + it.id;
  }

  std::vector<Comparison> comparisons;
  comparisons.reserve(real.comparisons.size() + wanted);
  for (Comparison c : real.comparisons) {
    c.left_id = "real:" + c.left_id;
    c.right_id = "real:" + c.right_id;
    comparisons.push_back(std::move(c));
  }
  std::vector<std::size_t> pick(synthetic.comparisons.size());
  std::iota(pick.begin(), pick.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(pick.begin(), pick.end(), rng);
  pick.resize(wanted);
  std::sort(pick.begin(), pick.end());
  for (std::size_t k : pick) {
    Comparison c = synthetic.comparisons[k];
    c.left_id = "syn:" + c.left_id;
    c.right_id = "syn:" + c.right_id;
    comparisons.push_back(std::move(c));
  }
  return make_dataset(std::move(items), std::move(comparisons));
}

TrainConfig train_config_from_json(const std::string& text,
                                   const TrainConfig& base) {
  using nlohmann::json;
  TrainConfig cfg = base;
  try {
    const json doc = json::parse(text);
    if (!doc.is_object()) throw Error("train config must be a JSON object");
    if (doc.contains("hyper")) {
      const json& h = doc["hyper"];
      Hyperparams& hp = cfg.hyper;
      hp.gamma = h.value("gamma", hp.gamma);
      hp.lambda_rank = h.value("lambda_rank", hp.lambda_rank);
      hp.lambda_tie = h.value("lambda_tie", hp.lambda_tie);
      hp.lambda_class = h.value("lambda_class", hp.lambda_class);
      hp.learning_rate = h.value("learning_rate", hp.learning_rate);
      hp.decay_every_steps = h.value("decay_every_steps", hp.decay_every_steps);
      hp.decay_factor = h.value("decay_factor", hp.decay_factor);
      hp.batch_size = h.value("batch_size", hp.batch_size);
      hp.max_epochs = h.value("max_epochs", hp.max_epochs);
      hp.seed = h.value("seed", hp.seed);
    }
    if (doc.contains("arch")) {
      const json& a = doc["arch"];
      cfg.arch.trunk_widths = a.value("trunk_widths", cfg.arch.trunk_widths);
      cfg.arch.fusion_widths = a.value("fusion_widths", cfg.arch.fusion_widths);
    }
    cfg.use_ties = doc.value("use_ties", cfg.use_ties);
    cfg.use_classification_head =
        doc.value("use_classification_head", cfg.use_classification_head);
    cfg.swap_augmentation = doc.value("swap_augmentation", cfg.swap_augmentation);
    cfg.patience = doc.value("patience", cfg.patience);
  } catch (const json::exception& e) {
    throw Error(std::string("malformed train config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string train_config_to_json(const TrainConfig& c) {
  using nlohmann::json;
  const Hyperparams& h = c.hyper;
  json doc{{"hyper",
            {{"gamma", h.gamma},
             {"lambda_rank", h.lambda_rank},
             {"lambda_tie", h.lambda_tie},
             {"lambda_class", h.lambda_class},
             {"learning_rate", h.learning_rate},
             {"decay_every_steps", h.decay_every_steps},
             {"decay_factor", h.decay_factor},
             {"batch_size", h.batch_size},
             {"max_epochs", h.max_epochs},
             {"seed", h.seed}}},
           {"arch",
            {{"trunk_widths", c.arch.trunk_widths},
             {"fusion_widths", c.arch.fusion_widths}}},
           {"use_ties", c.use_ties},
           {"use_classification_head", c.use_classification_head},
           {"swap_augmentation", c.swap_augmentation},
           {"patience", c.patience}};
  return doc.dump(2);
}

}  // namespace pcs
