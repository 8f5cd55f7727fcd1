#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pcs/baselines.h"
#include "pcs/core.h"
#include "pcs/dataio.h"
#include "pcs/losses.h"
#include "pcs/metrics.h"
#include "pcs/model.h"
#include "pcs/simulator.h"
#include "pcs/trainer.h"

namespace py = pybind11;

namespace {

// pybind11 holders can't be const; no mutating method is bound.
using CatalogPtr = std::shared_ptr<pcs::ItemCatalog>;

CatalogPtr expose(const std::shared_ptr<const pcs::ItemCatalog>& c) {
  return std::const_pointer_cast<pcs::ItemCatalog>(c);
}

std::vector<pcs::Comparison> comparisons_of(const pcs::Dataset& d) {
  return d.comparisons;
}

py::list history_rows(const pcs::TrainHistory& h) {
  py::list rows;
  for (const auto& r : h.epochs) {
    py::dict d;
    d["epoch"] = r.epoch;
    d["loss_total"] = r.train_loss.total;
    d["loss_classification"] = r.train_loss.classification;
    d["loss_ranking"] = r.train_loss.ranking;
    d["loss_tie"] = r.train_loss.tie;
    d["dev_accuracy2"] = r.dev_accuracy2;
    d["dev_accuracy3"] = r.dev_accuracy3;
    d["learning_rate"] = r.learning_rate;
    rows.append(d);
  }
  return rows;
}

}  // namespace

PYBIND11_MODULE(_pcs, m) {
  m.doc() = "Tie-aware pairwise comparison scoring";

  py::register_exception<pcs::Error>(m, "Error", PyExc_ValueError);

  py::enum_<pcs::Outcome>(m, "Outcome")
      .value("LEFT", pcs::Outcome::kLeft)
      .value("TIE", pcs::Outcome::kTie)
      .value("RIGHT", pcs::Outcome::kRight)
      .def("__int__", [](pcs::Outcome y) { return pcs::to_int(y); });
  m.def("outcome_from_int", &pcs::outcome_from_int);

  // ---------------------------------------------------------- data types

  py::class_<pcs::Item>(m, "Item")
      .def(py::init([](std::string id, std::vector<double> features,
                       std::map<std::string, double> attributes,
                       std::optional<std::string> media_uri) {
             return pcs::Item{std::move(id), std::move(features),
                              std::move(attributes), std::move(media_uri)};
           }),
           py::arg("id"), py::arg("features"),
           py::arg("attributes") = std::map<std::string, double>{},
           py::arg("media_uri") = std::nullopt)
      .def_readwrite("id", &pcs::Item::id)
      .def_readwrite("features", &pcs::Item::features)
      .def_readwrite("attributes", &pcs::Item::attributes)
      .def_readwrite("media_uri", &pcs::Item::media_uri);

  py::class_<pcs::Comparison>(m, "Comparison")
      .def(py::init([](std::string l, std::string r, pcs::Outcome y,
                       std::optional<std::string> who, std::int64_t t) {
             return pcs::Comparison{std::move(l), std::move(r), y, std::move(who), t};
           }),
           py::arg("left_id"), py::arg("right_id"), py::arg("outcome"),
           py::arg("respondent_id") = std::nullopt, py::arg("created_at") = 0)
      .def_readwrite("left_id", &pcs::Comparison::left_id)
      .def_readwrite("right_id", &pcs::Comparison::right_id)
      .def_readwrite("outcome", &pcs::Comparison::outcome)
      .def_readwrite("respondent_id", &pcs::Comparison::respondent_id)
      .def_readwrite("created_at", &pcs::Comparison::created_at)
      .def(py::self == py::self)
      .def("__repr__", [](const pcs::Comparison& c) {
        return "Comparison(" + c.left_id + ", " + c.right_id + ", " +
               std::to_string(pcs::to_int(c.outcome)) + ")";
      });

  py::class_<pcs::ItemCatalog, CatalogPtr>(m, "ItemCatalog")
      .def(py::init([](std::vector<pcs::Item> items) {
        return std::make_shared<pcs::ItemCatalog>(std::move(items));
      }))
      .def("__len__", &pcs::ItemCatalog::size)
      .def_property_readonly("feature_dim", &pcs::ItemCatalog::feature_dim)
      .def_property_readonly("ids",
                             [](const pcs::ItemCatalog& c) {
                               std::vector<std::string> ids;
                               for (const auto& it : c.items()) ids.push_back(it.id);
                               return ids;
                             })
      .def("__getitem__", [](const pcs::ItemCatalog& c, const std::string& id) {
        return c.at(id);
      })
      .def("__contains__", [](const pcs::ItemCatalog& c, const std::string& id) {
        return c.find(id).has_value();
      });

  py::class_<pcs::Dataset>(m, "Dataset")
      .def_property_readonly("catalog", [](const pcs::Dataset& d) { return expose(d.items); })
      .def_property_readonly("comparisons", &comparisons_of)
      .def("__len__", [](const pcs::Dataset& d) { return d.comparisons.size(); })
      .def("tie_count", &pcs::Dataset::tie_count);

  m.def("make_dataset",
        [](CatalogPtr cat, std::vector<pcs::Comparison> cs) {
          return pcs::make_dataset(std::move(cat), std::move(cs));
        },
        py::arg("catalog"), py::arg("comparisons"));
  m.def(
      "split",
      [](const pcs::Dataset& d, double train, double dev, double test, std::uint64_t seed) {
        const auto r = pcs::split(d, pcs::SplitSpec{train, dev, test, seed});
        return py::make_tuple(r.train, r.dev, r.test);
      },
      py::arg("dataset"), py::arg("train") = 0.7, py::arg("dev") = 0.1,
      py::arg("test") = 0.2, py::arg("seed") = 0);

  py::class_<pcs::Standardization>(m, "Standardization")
      .def(py::init<>())
      .def_readwrite("mean", &pcs::Standardization::mean)
      .def_readwrite("stddev", &pcs::Standardization::stddev);

  // --------------------------------------------------------------- I/O

  m.def(
      "load_items",
      [](const std::string& path, std::optional<pcs::Standardization> fixed) {
        const auto loaded = pcs::load_items(path, fixed ? &*fixed : nullptr);
        return py::make_tuple(expose(loaded.catalog), loaded.standardization);
      },
      py::arg("path"), py::arg("standardization") = std::nullopt,
      "Returns (catalog, standardization).");
  m.def("load_comparisons", &pcs::load_comparisons);
  m.def("save_comparisons",
        [](const std::string& path, const std::vector<pcs::Comparison>& cs) {
          pcs::save_comparisons(path, cs);
        });
  m.def(
      "ratings_to_pairs",
      [](const std::vector<std::tuple<std::string, std::string, int>>& ratings,
         std::optional<std::size_t> max_pairs_per_user, std::uint64_t seed,
         std::int64_t base_time_ms) {
        std::vector<pcs::RatingRecord> recs;
        for (const auto& [who, item, r] : ratings) recs.push_back({who, item, r});
        pcs::ConversionOptions opt;
        opt.max_pairs_per_user = max_pairs_per_user;
        opt.seed = seed;
        opt.base_time_ms = base_time_ms;
        return pcs::ratings_to_pairs(recs, opt);
      },
      py::arg("ratings"), py::arg("max_pairs_per_user") = std::nullopt,
      py::arg("seed") = 0, py::arg("base_time_ms") = 0,
      "ratings: iterable of (respondent_id, item_id, rating).");

  // ------------------------------------------------------------ losses

  m.def("hinge_rank_loss", &pcs::hinge_rank_loss, py::arg("f_i"), py::arg("f_j"),
        py::arg("y"), py::arg("gamma"));
  m.def("tie_loss", &pcs::tie_loss, py::arg("f_i"), py::arg("f_j"), py::arg("gamma"));

  // ------------------------------------------------------------- model

  py::class_<pcs::Hyperparams>(m, "Hyperparams")
      .def(py::init<>())
      .def_readwrite("gamma", &pcs::Hyperparams::gamma)
      .def_readwrite("lambda_rank", &pcs::Hyperparams::lambda_rank)
      .def_readwrite("lambda_tie", &pcs::Hyperparams::lambda_tie)
      .def_readwrite("lambda_class", &pcs::Hyperparams::lambda_class)
      .def_readwrite("learning_rate", &pcs::Hyperparams::learning_rate)
      .def_readwrite("decay_every_steps", &pcs::Hyperparams::decay_every_steps)
      .def_readwrite("decay_factor", &pcs::Hyperparams::decay_factor)
      .def_readwrite("batch_size", &pcs::Hyperparams::batch_size)
      .def_readwrite("max_epochs", &pcs::Hyperparams::max_epochs)
      .def_readwrite("seed", &pcs::Hyperparams::seed)
      .def("validate", &pcs::Hyperparams::validate);

  py::class_<pcs::Architecture>(m, "Architecture")
      .def(py::init<>())
      .def_readwrite("input_dim", &pcs::Architecture::input_dim)
      .def_readwrite("trunk_widths", &pcs::Architecture::trunk_widths)
      .def_readwrite("fusion_widths", &pcs::Architecture::fusion_widths);

  py::class_<pcs::ModelParams>(m, "Model")
      .def_readonly("arch", &pcs::ModelParams::arch)
      .def_readonly("hyper", &pcs::ModelParams::hyper)
      .def_readonly("values", &pcs::ModelParams::values)
      .def("rank_score",
           [](const pcs::ModelParams& p, const std::vector<double>& x) {
             return pcs::rank_score(p, x);
           })
      .def("classify_pair",
           [](const pcs::ModelParams& p, const std::vector<double>& a,
              const std::vector<double>& b) { return pcs::classify_pair(p, a, b); },
           "(p_left, p_tie, p_right)");
  m.def("init_model", &pcs::init_params, py::arg("arch"), py::arg("seed"),
        py::arg("hyper") = pcs::Hyperparams{});
  m.def(
      "save_checkpoint",
      [](const pcs::ModelParams& p, const std::string& path,
         std::optional<pcs::Standardization> st) { pcs::save_checkpoint({p, st}, path); },
      py::arg("model"), py::arg("path"), py::arg("standardization") = std::nullopt);
  m.def(
      "load_checkpoint",
      [](const std::string& path) {
        auto c = pcs::load_checkpoint(path);
        return py::make_tuple(std::move(c.params), std::move(c.standardization));
      },
      "Returns (model, standardization or None).");

  // ----------------------------------------------------------- training

  py::class_<pcs::TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("hyper", &pcs::TrainConfig::hyper)
      .def_readwrite("arch", &pcs::TrainConfig::arch)
      .def_readwrite("use_ties", &pcs::TrainConfig::use_ties)
      .def_readwrite("use_classification_head", &pcs::TrainConfig::use_classification_head)
      .def_readwrite("swap_augmentation", &pcs::TrainConfig::swap_augmentation)
      .def_readwrite("patience", &pcs::TrainConfig::patience)
      .def_static("from_json",
                  [](const std::string& text) { return pcs::train_config_from_json(text); })
      .def("to_json", &pcs::train_config_to_json);
  m.def("default_simulation_train_config", &pcs::default_simulation_train_config);

  m.def(
      "train",
      [](const pcs::Dataset& train, const pcs::Dataset& dev, const pcs::TrainConfig& cfg) {
        pcs::TrainResult r;
        {
          py::gil_scoped_release release;
          r = pcs::train(train, dev, cfg);
        }
        return py::make_tuple(std::move(r.params), history_rows(r.history),
                              r.history.best_epoch);
      },
      py::arg("train"), py::arg("dev"), py::arg("config") = pcs::TrainConfig{},
      "Returns (model, history rows, best epoch).");

  // ------------------------------------------------------------ metrics

  py::class_<pcs::ScoredPair>(m, "ScoredPair")
      .def(py::init<double, double, pcs::Outcome>(), py::arg("f_left"),
           py::arg("f_right"), py::arg("y"))
      .def_readwrite("f_left", &pcs::ScoredPair::f_left)
      .def_readwrite("f_right", &pcs::ScoredPair::f_right)
      .def_readwrite("y", &pcs::ScoredPair::y);
  m.def("score_pairs",
        [](const pcs::ModelParams& p, CatalogPtr cat, const std::vector<pcs::Comparison>& cs) {
          return pcs::score_pairs(p, *cat, cs);
        });
  m.def("predict_outcome", &pcs::predict_outcome);
  m.def("accuracy_2class",
        [](const std::vector<pcs::ScoredPair>& p) { return pcs::accuracy_2class(p); });
  m.def("accuracy_3class", [](const std::vector<pcs::ScoredPair>& p, double gamma) {
    return pcs::accuracy_3class(p, gamma);
  });
  m.def(
      "_evaluate_json",
      [](const std::vector<pcs::ScoredPair>& p, double gamma) {
        return pcs::report_to_json(pcs::evaluate(p, gamma));
      });
  m.def("model_scores", [](const pcs::ModelParams& p, CatalogPtr cat) {
    return pcs::model_score_table(p, *cat).scores;
  });

  // ----------------------------------------------------------- baselines

  m.def(
      "fit_baseline",
      [](const std::string& method, const std::vector<pcs::Comparison>& cs) {
        return pcs::fit_baseline(pcs::parse_baseline_method(method), cs).scores;
      },
      py::arg("method"), py::arg("comparisons"),
      "method: elo, skill, rc or rk. Returns {item_id: score}.");
  m.def("rao_kupper_probabilities", [](double pi_i, double pi_j, double theta) {
    const auto p = pcs::rao_kupper_probabilities(pi_i, pi_j, theta);
    return py::make_tuple(p.i_wins, p.tie, p.j_wins);
  });

  // ----------------------------------------------------------- simulator

  py::class_<pcs::SimConfig>(m, "SimConfig")
      .def(py::init<>())
      .def_readwrite("n_items", &pcs::SimConfig::n_items)
      .def_readwrite("feature_dim", &pcs::SimConfig::feature_dim)
      .def_readwrite("avg_comparisons_per_item", &pcs::SimConfig::avg_comparisons_per_item)
      .def_readwrite("tie_bandwidth", &pcs::SimConfig::tie_bandwidth)
      .def_readwrite("respondent_noise", &pcs::SimConfig::respondent_noise)
      .def_readwrite("seed", &pcs::SimConfig::seed);
  m.def(
      "simulate",
      [](const pcs::SimConfig& cfg) {
        const auto world = pcs::gen_world(cfg);
        return py::make_tuple(expose(world.items), world.true_scores,
                              pcs::gen_comparisons(world, cfg));
      },
      "Returns (catalog, true scores aligned with catalog.ids, comparisons).");
  m.def(
      "run_budget_experiment",
      [](const std::string& grid_json) {
        const auto grid = pcs::budget_grid_from_json(grid_json);
        std::vector<pcs::BudgetRow> rows;
        {
          py::gil_scoped_release release;
          rows = pcs::run_budget_experiment(grid);
        }
        return pcs::budget_rows_to_csv(rows);
      },
      "Runs a JSON budget grid and returns the per-run CSV.");
}
