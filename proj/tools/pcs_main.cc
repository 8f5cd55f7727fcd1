// pcs: command-line front end for the pairwise comparison toolkit.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pcs/baselines.h"
#include "pcs/core.h"
#include "pcs/dataio.h"
#include "pcs/metrics.h"
#include "pcs/model.h"
#include "pcs/random.h"
#include "pcs/service.h"
#include "pcs/simulator.h"
#include "pcs/trainer.h"

namespace {

using nlohmann::json;

constexpr int kRuntimeError = 1;
constexpr int kUsageError = 2;

// Explicit --seed wins, then a seed present in the config, then a fresh one
// which is reported so the run can be repeated.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag,
                           const std::optional<std::uint64_t>& from_config) {
  if (flag) return *flag;
  if (from_config) return *from_config;
  const std::uint64_t s = pcs::fresh_seed();
  std::fprintf(stderr, "seed: %llu\n", static_cast<unsigned long long>(s));
  return s;
}

std::optional<std::uint64_t> config_seed(const std::string& text,
                                         const char* section) {
  const json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) return std::nullopt;
  const json* node = &doc;
  if (section) {
    if (!doc.contains(section)) return std::nullopt;
    node = &doc[section];
  }
  if (!node->is_object() || !node->contains("seed")) return std::nullopt;
  return (*node)["seed"].get<std::uint64_t>();
}

// "0.1..0.9" with --gamma-step, or a comma separated list.
std::vector<double> parse_gammas(const std::string& text, double step) {
  std::vector<double> out;
  const auto dots = text.find("..");
  if (dots != std::string::npos) {
    const double lo = std::stod(text.substr(0, dots));
    const double hi = std::stod(text.substr(dots + 2));
    if (!(step > 0.0)) throw pcs::Error("gamma step must be > 0");
    if (hi < lo) throw pcs::Error("gamma range must be ascending");
    const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
    for (long k = 0; k <= n; ++k) out.push_back(lo + step * k);
    return out;
  }
  for (const std::string& part : pcs::csv::split(text)) {
    out.push_back(std::stod(part));
  }
  return out;
}

struct TrainInputs {
  pcs::LoadedItems items;
  pcs::Dataset dataset;
  pcs::TrainConfig config;
  pcs::SplitResult parts;
  std::uint64_t seed = 0;
};

TrainInputs prepare_training(const std::string& items_path,
                             const std::string& comparisons_path,
                             const std::string& config_path,
                             const std::optional<std::uint64_t>& seed_flag) {
  TrainInputs in;
  std::optional<std::uint64_t> from_config;
  if (!config_path.empty()) {
    const std::string text = pcs::read_file(config_path);
    in.config = pcs::train_config_from_json(text);
    from_config = config_seed(text, "hyper");
  }
  in.seed = resolve_seed(seed_flag, from_config);
  in.config.hyper.seed = in.seed;
  in.items = pcs::load_items(items_path);
  in.dataset =
      pcs::make_dataset(in.items.catalog, pcs::load_comparisons(comparisons_path));
  pcs::SplitSpec spec;
  spec.seed = pcs::derive_seed(in.seed, 2);
  in.parts = pcs::split(in.dataset, spec);
  return in;
}

pcs::Checkpoint load_with_items(const std::string& ckpt_path,
                                const std::string& items_path,
                                pcs::LoadedItems& items) {
  pcs::Checkpoint ckpt = pcs::load_checkpoint(ckpt_path);
  items = pcs::load_items(items_path, ckpt.standardization
                                          ? &*ckpt.standardization
                                          : nullptr);
  return ckpt;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tie-aware pairwise comparison ranking toolkit"};
  app.require_subcommand(1);
  std::optional<std::uint64_t> seed;

  // convert
  auto* convert = app.add_subcommand("convert", "Ratings CSV to comparisons CSV");
  std::string ratings_path, out_path;
  int scale = 0;
  std::optional<std::size_t> max_pairs;
  std::string base_time;
  convert->add_option("--ratings", ratings_path, "respondent_id,item_id,rating")
      ->required();
  convert->add_option("--out", out_path)->required();
  convert->add_option("--scale", scale, "Largest valid rating (0: unbounded)");
  convert->add_option("--max-pairs-per-user", max_pairs);
  convert->add_option("--base-time", base_time,
                      "RFC 3339 timestamp of the first comparison");
  convert->add_option("--seed", seed);

  // train
  auto* train = app.add_subcommand("train", "Train the scoring model");
  std::string items_path, comparisons_path, config_path, ckpt_path,
      history_path;
  train->add_option("--items", items_path)->required();
  train->add_option("--comparisons", comparisons_path)->required();
  train->add_option("--config", config_path);
  train->add_option("--out", ckpt_path)->required();
  train->add_option("--history", history_path, "Per-epoch CSV");
  train->add_option("--seed", seed);

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  double gamma = 0.0;
  std::string hist_path;
  double bin_width = 0.1;
  eval->add_option("--ckpt", ckpt_path)->required();
  eval->add_option("--items", items_path)->required();
  eval->add_option("--comparisons", comparisons_path)->required();
  eval->add_option("--gamma", gamma)->required();
  eval->add_option("--histogram", hist_path, "Rank-difference histogram CSV");
  eval->add_option("--bin-width", bin_width);

  // baseline
  auto* baseline = app.add_subcommand("baseline", "Fit a classical baseline");
  std::string method;
  baseline->add_option("--method", method, "elo|skill|rc|rk")->required();
  baseline->add_option("--comparisons", comparisons_path)->required();
  baseline->add_option("--out", out_path)->required();

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Budget experiment");
  std::string grid_path;
  std::optional<std::size_t> threads;
  simulate->add_option("--grid", grid_path)->required();
  simulate->add_option("--out", out_path)->required();
  simulate->add_option("--threads", threads);
  simulate->add_option("--seed", seed);

  // sweep-gamma
  auto* sweep = app.add_subcommand("sweep-gamma", "Train once per gamma");
  std::string gammas_text = "0.1..0.9";
  double gamma_step = 0.1;
  sweep->add_option("--gammas", gammas_text, "lo..hi or a,b,c");
  sweep->add_option("--gamma-step", gamma_step);
  sweep->add_option("--items", items_path)->required();
  sweep->add_option("--comparisons", comparisons_path)->required();
  sweep->add_option("--config", config_path);
  sweep->add_option("--out", out_path)->required();
  sweep->add_option("--seed", seed);

  // score
  auto* score = app.add_subcommand("score", "Export model scores");
  score->add_option("--ckpt", ckpt_path)->required();
  score->add_option("--items", items_path)->required();
  score->add_option("--out", out_path)->required();

  // serve
  auto* serve = app.add_subcommand("serve", "Run the survey service");
  std::string listen, log_path, static_dir;
  serve->add_option("--config", config_path);
  serve->add_option("--listen", listen);
  serve->add_option("--items", items_path);
  serve->add_option("--log", log_path);
  serve->add_option("--ckpt", ckpt_path);
  serve->add_option("--static-dir", static_dir);
  serve->add_option("--seed", seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (command == "convert") {
      pcs::ConversionOptions opt;
      opt.max_pairs_per_user = max_pairs;
      if (max_pairs) opt.seed = resolve_seed(seed, std::nullopt);
      if (!base_time.empty()) opt.base_time_ms = pcs::parse_timestamp(base_time);
      const auto ratings = pcs::load_ratings(ratings_path, scale);
      const auto pairs = pcs::ratings_to_pairs(ratings, opt);
      pcs::save_comparisons(out_path, pairs);
      std::cout << json{{"comparisons", pairs.size()}}.dump() << "\n";

    } else if (command == "train") {
      TrainInputs in =
          prepare_training(items_path, comparisons_path, config_path, seed);
      const pcs::TrainResult fit =
          pcs::train(in.parts.train, in.parts.dev, in.config);
      pcs::save_checkpoint({fit.params, in.items.standardization}, ckpt_path);
      if (!history_path.empty()) {
        pcs::write_file(history_path, pcs::history_to_csv(fit.history));
      }
      const auto scored = pcs::score_pairs(fit.params, *in.items.catalog,
                                           in.parts.test.comparisons);
      std::cout << pcs::report_to_json(
                       pcs::evaluate(scored, in.config.hyper.gamma))
                << "\n";

    } else if (command == "eval") {
      pcs::LoadedItems items;
      const pcs::Checkpoint ckpt = load_with_items(ckpt_path, items_path, items);
      const auto scored = pcs::score_pairs(ckpt.params, *items.catalog,
                                           pcs::load_comparisons(comparisons_path));
      std::cout << pcs::report_to_json(pcs::evaluate(scored, gamma)) << "\n";
      if (!hist_path.empty()) {
        pcs::write_file(hist_path, pcs::histogram_to_csv(
                                       pcs::rank_diff_histogram(scored, bin_width)));
      }

    } else if (command == "baseline") {
      const auto comparisons = pcs::load_comparisons(comparisons_path);
      const pcs::ScoreTable table =
          pcs::fit_baseline(pcs::parse_baseline_method(method), comparisons);
      pcs::export_scores(table, out_path);

    } else if (command == "simulate") {
      const std::string text = pcs::read_file(grid_path);
      pcs::BudgetGrid grid = pcs::budget_grid_from_json(text);
      grid.base.seed = resolve_seed(seed, config_seed(text, "world"));
      if (threads) grid.threads = *threads;
      const auto rows = pcs::run_budget_experiment(grid);
      pcs::write_file(out_path, pcs::budget_rows_to_csv(rows));
      json summary = json::array();
      for (const auto& s : pcs::summarize(rows)) {
        summary.push_back({{"avg_comparisons", s.avg_comparisons},
                           {"method", s.method},
                           {"mean_accuracy2", s.mean_accuracy2},
                           {"stddev_accuracy2", s.stddev_accuracy2},
                           {"n", s.n}});
      }
      std::cout << summary.dump(2) << "\n";

    } else if (command == "sweep-gamma") {
      TrainInputs in =
          prepare_training(items_path, comparisons_path, config_path, seed);
      const auto gammas = parse_gammas(gammas_text, gamma_step);
      const auto rows = pcs::sweep_gamma(in.parts.train, in.parts.dev,
                                         in.parts.test, gammas, in.config);
      pcs::write_file(out_path, pcs::sweep_to_csv(rows));

    } else if (command == "score") {
      pcs::LoadedItems items;
      const pcs::Checkpoint ckpt = load_with_items(ckpt_path, items_path, items);
      pcs::export_scores(pcs::model_score_table(ckpt.params, *items.catalog),
                         out_path);

    } else if (command == "serve") {
      pcs::ServiceConfig cfg;
      if (!config_path.empty()) {
        const std::string text = pcs::read_file(config_path);
        cfg = pcs::service_config_from_json(text);
        if (!seed && !config_seed(text, nullptr)) seed = pcs::fresh_seed();
      } else if (!seed) {
        seed = pcs::fresh_seed();
      }
      pcs::apply_env_overrides(cfg);
      if (!listen.empty()) cfg.listen_addr = listen;
      if (!items_path.empty()) cfg.items_path = items_path;
      if (!log_path.empty()) cfg.log_path = log_path;
      if (!ckpt_path.empty()) cfg.model_checkpoint = ckpt_path;
      if (!static_dir.empty()) cfg.static_dir = static_dir;
      if (seed) {
        cfg.seed = *seed;
        cfg.scheduler.seed = pcs::derive_seed(*seed, 1);
        std::fprintf(stderr, "seed: %llu\n",
                     static_cast<unsigned long long>(*seed));
      }
      pcs::run_service(cfg);
    }
  } catch (const std::exception& e) {
    std::cerr << json{{"error", e.what()}, {"command", command}}.dump() << "\n";
    return kRuntimeError;
  }
  return 0;
}
