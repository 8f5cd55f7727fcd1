#ifndef PCS_METRICS_H_
#define PCS_METRICS_H_

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcs/baselines.h"
#include "pcs/core.h"
#include "pcs/model.h"

namespace pcs {

// Scores of both sides of one evaluated comparison plus its ground truth.
struct ScoredPair {
  double f_left = 0.0;
  double f_right = 0.0;
  Outcome y = Outcome::kTie;
};

std::vector<ScoredPair> score_pairs(const ModelParams& params,
                                    const ItemCatalog& items,
                                    std::span<const Comparison> comparisons);
// Items absent from the table take its default score.
std::vector<ScoredPair> score_pairs(const ScoreTable& table,
                                    std::span<const Comparison> comparisons);

// rank_score of every catalog item, as a table with method "model".
ScoreTable model_score_table(const ModelParams& params,
                             const ItemCatalog& items);

// Left iff f_left > f_right + gamma, right iff f_right > f_left + gamma.
Outcome predict_outcome(double f_left, double f_right, double gamma);

// Fraction of non-tie comparisons whose winner has the strictly higher
// score. Throws when there are no non-tie comparisons.
double accuracy_2class(std::span<const ScoredPair> pairs);

// Fraction of all comparisons whose 3-class prediction at `gamma` is right.
double accuracy_3class(std::span<const ScoredPair> pairs, double gamma);

struct MisclassifiedLoss {
  std::optional<double> mean;  // empty when nothing is misclassified
  std::size_t count = 0;
};

// Mean per-comparison ranking loss (hinge for non-ties, tie contraction for
// ties, both at `gamma`) over comparisons misclassified by the 3-class rule.
MisclassifiedLoss misclassified_loss(std::span<const ScoredPair> pairs,
                                     double gamma);

struct RankDiffHistogram {
  double bin_width = 0.0;
  // Indexed by class_index(y); bin k covers [k * bin_width, (k+1) * bin_width).
  std::array<std::map<std::int64_t, std::size_t>, 3> bins;
  std::array<std::size_t, 3> counts{};
  std::array<std::optional<double>, 3> mean_abs_diff;
};

// Histogram of signed f_left - f_right, separately per ground-truth class.
RankDiffHistogram rank_diff_histogram(std::span<const ScoredPair> pairs,
                                      double bin_width);
std::string histogram_to_csv(const RankDiffHistogram& hist);

struct EvalReport {
  std::optional<double> accuracy2;
  double accuracy3 = 0.0;
  double gamma = 0.0;
  std::optional<double> mean_misclassified_loss;
  std::size_t n_misclassified = 0;
  // confusion[true class][predicted class]
  std::array<std::array<std::size_t, 3>, 3> confusion{};
  std::array<std::size_t, 3> n_evaluated{};
  std::optional<double> tie_recall;
};

EvalReport evaluate(std::span<const ScoredPair> pairs, double gamma);
std::string report_to_json(const EvalReport& report);

}  // namespace pcs

#endif  // PCS_METRICS_H_
