#include "pcs/metrics.h"

#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pcs/losses.h"

namespace pcs {

std::vector<ScoredPair> score_pairs(const ModelParams& params,
                                    const ItemCatalog& items,
                                    std::span<const Comparison> comparisons) {
  std::vector<double> cache(items.size(), std::nan(""));
  auto score = [&](const std::string& id) {
    const std::size_t k = items.index_of(id);
    if (std::isnan(cache[k])) cache[k] = rank_score(params, items[k].features);
    return cache[k];
  };
  std::vector<ScoredPair> out;
  out.reserve(comparisons.size());
  for (const Comparison& c : comparisons) {
    out.push_back({score(c.left_id), score(c.right_id), c.outcome});
  }
  return out;
}

std::vector<ScoredPair> score_pairs(const ScoreTable& table,
                                    std::span<const Comparison> comparisons) {
  std::vector<ScoredPair> out;
  out.reserve(comparisons.size());
  for (const Comparison& c : comparisons) {
    out.push_back({table.score_or_default(c.left_id),
                   table.score_or_default(c.right_id), c.outcome});
  }
  return out;
}

ScoreTable model_score_table(const ModelParams& params,
                             const ItemCatalog& items) {
  ScoreTable t;
  t.method = "model";
  for (const Item& it : items.items()) {
    t.scores[it.id] = rank_score(params, it.features);
  }
  return t;
}

Outcome predict_outcome(double f_left, double f_right, double gamma) {
  if (f_left > f_right + gamma) return Outcome::kLeft;
  if (f_right > f_left + gamma) return Outcome::kRight;
  return Outcome::kTie;
}

double accuracy_2class(std::span<const ScoredPair> pairs) {
  std::size_t total = 0;
  std::size_t correct = 0;
  for (const ScoredPair& p : pairs) {
    if (is_tie(p.y)) continue;
    ++total;
    // Exact equality is never correct.
    if (p.y == Outcome::kLeft && p.f_left > p.f_right) ++correct;
    if (p.y == Outcome::kRight && p.f_right > p.f_left) ++correct;
  }
  if (total == 0) throw Error("accuracy_2class: no non-tie comparisons");
  return static_cast<double>(correct) / static_cast<double>(total);
}

double accuracy_3class(std::span<const ScoredPair> pairs, double gamma) {
  if (pairs.empty()) throw Error("accuracy_3class: empty comparison set");
  if (!(gamma >= 0.0)) throw Error("accuracy_3class: gamma must be >= 0");
  std::size_t correct = 0;
  for (const ScoredPair& p : pairs) {
    correct += predict_outcome(p.f_left, p.f_right, gamma) == p.y;
  }
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

MisclassifiedLoss misclassified_loss(std::span<const ScoredPair> pairs,
                                     double gamma) {
  MisclassifiedLoss out;
  double sum = 0.0;
  for (const ScoredPair& p : pairs) {
    if (predict_outcome(p.f_left, p.f_right, gamma) == p.y) continue;
    ++out.count;
    sum += is_tie(p.y) ? tie_loss(p.f_left, p.f_right, gamma)
                       : hinge_rank_loss(p.f_left, p.f_right, p.y, gamma);
  }
  if (out.count > 0) out.mean = sum / static_cast<double>(out.count);
  return out;
}

RankDiffHistogram rank_diff_histogram(std::span<const ScoredPair> pairs,
                                      double bin_width) {
  if (!(bin_width > 0.0)) throw Error("bin_width must be > 0");
  RankDiffHistogram h;
  h.bin_width = bin_width;
  std::array<double, 3> abs_sum{};
  for (const ScoredPair& p : pairs) {
    const int k = class_index(p.y);
    const double d = p.f_left - p.f_right;
    const auto bin = static_cast<std::int64_t>(std::floor(d / bin_width));
    ++h.bins[k][bin];
    ++h.counts[k];
    abs_sum[k] += std::abs(d);
  }
  for (int k = 0; k < 3; ++k) {
    if (h.counts[k] > 0) {
      h.mean_abs_diff[k] = abs_sum[k] / static_cast<double>(h.counts[k]);
    }
  }
  return h;
}

std::string histogram_to_csv(const RankDiffHistogram& hist) {
  std::ostringstream out;
  out.precision(17);
  out << "class,bin_left,count\n";
  for (int k = 0; k < 3; ++k) {
    for (const auto& [bin, count] : hist.bins[k]) {
      out << (k - 1) << ',' << static_cast<double>(bin) * hist.bin_width << ','
          << count << '\n';
    }
  }
  return out.str();
}

EvalReport evaluate(std::span<const ScoredPair> pairs, double gamma) {
  if (pairs.empty()) throw Error("evaluate: empty comparison set");
  EvalReport r;
  r.gamma = gamma;
  std::size_t nontie = 0;
  for (const ScoredPair& p : pairs) {
    const int truth = class_index(p.y);
    const int pred = class_index(predict_outcome(p.f_left, p.f_right, gamma));
    ++r.confusion[truth][pred];
    ++r.n_evaluated[truth];
    nontie += !is_tie(p.y);
  }
  if (nontie > 0) r.accuracy2 = accuracy_2class(pairs);
  r.accuracy3 = accuracy_3class(pairs, gamma);
  const auto mis = misclassified_loss(pairs, gamma);
  r.mean_misclassified_loss = mis.mean;
  r.n_misclassified = mis.count;
  if (r.n_evaluated[1] > 0) {
    r.tie_recall = static_cast<double>(r.confusion[1][1]) /
                   static_cast<double>(r.n_evaluated[1]);
  }
  return r;
}

std::string report_to_json(const EvalReport& r) {
  using nlohmann::json;
  auto opt = [](const std::optional<double>& v) {
    return v ? json(*v) : json(nullptr);
  };
  json doc{{"accuracy2", opt(r.accuracy2)},
           {"accuracy3", r.accuracy3},
           {"gamma", r.gamma},
           {"mean_misclassified_loss", opt(r.mean_misclassified_loss)},
           {"n_misclassified", r.n_misclassified},
           {"tie_recall", opt(r.tie_recall)},
           {"confusion", r.confusion},
           {"n_evaluated",
            {{"left", r.n_evaluated[0]},
             {"tie", r.n_evaluated[1]},
             {"right", r.n_evaluated[2]}}}};
  return doc.dump(2);
}

}  // namespace pcs
