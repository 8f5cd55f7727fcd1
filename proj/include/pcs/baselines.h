#ifndef PCS_BASELINES_H_
#define PCS_BASELINES_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcs/core.h"

namespace pcs {

// Item id -> latent score. Common output of the trained model and every
// baseline.
struct ScoreTable {
  std::map<std::string, double> scores;
  std::string method;
  std::int64_t fitted_at = 0;  // ms since epoch
  // Score assumed for items the method never saw (its prior).
  double default_score = 0.0;
  // Connected components of the comparison graph (Rank Centrality only);
  // more than one means scores are only comparable within a component.
  std::size_t n_components = 1;

  double score_or_default(const std::string& id) const;
};

// Comparisons ordered by created_at; equal timestamps keep input order.
std::vector<Comparison> in_time_order(std::span<const Comparison> comparisons);

// ---------------------------------------------------------------- Elo

struct EloConfig {
  double k_factor = 32.0;
  double initial_rating = 1500.0;
  double scale = 400.0;
};

class EloRater {
 public:
  explicit EloRater(EloConfig config = {}) : config_(config) {}

  void update(const Comparison& c);
  double rating(const std::string& id) const;
  const std::map<std::string, double>& ratings() const { return ratings_; }
  ScoreTable table() const;

 private:
  EloConfig config_;
  std::map<std::string, double> ratings_;
};

ScoreTable elo_fit(std::span<const Comparison> comparisons,
                   const EloConfig& config = {});

// ---------------------------------------------- two-player Gaussian skill

struct SkillConfig {
  double mu0 = 25.0;
  double sigma0 = 25.0 / 3.0;
  std::optional<double> beta;              // default sigma0 / 2
  std::optional<double> tau;               // default sigma0 / 100
  std::optional<double> draw_probability;  // default: empirical tie fraction
};

struct SkillRating {
  double mu = 0.0;
  double sigma = 0.0;
};

namespace truncation {
// Additive and multiplicative corrections of a Gaussian truncated to
// (epsilon, inf) for wins and to [-epsilon, epsilon] for draws.
double v_win(double t, double epsilon);
double w_win(double t, double epsilon);
double v_draw(double t, double epsilon);
double w_draw(double t, double epsilon);
}  // namespace truncation

// Draw margin implied by a draw probability: Phi^-1((p + 1) / 2) sqrt(2) beta.
double draw_margin(double draw_probability, double beta);

std::map<std::string, SkillRating> skill_ratings(
    std::span<const Comparison> comparisons, const SkillConfig& config = {});

// Exported score is the conservative estimate mu - 3 sigma.
ScoreTable skill_fit(std::span<const Comparison> comparisons,
                     const SkillConfig& config = {});

// ------------------------------------------------------ Rank Centrality

struct RCConfig {
  double epsilon = 1.0;
  double tolerance = 1e-10;
  std::size_t max_iterations = 200000;
};

// Scores are stationary probabilities of the comparison random walk.
ScoreTable rank_centrality(std::span<const Comparison> comparisons,
                           const RCConfig& config = {});

// ---------------------------------------------------------- Rao-Kupper

struct RKParams {
  std::map<std::string, double> pi;
  double theta = 1.0;
};

struct RKProbabilities {
  double i_wins = 0.0;
  double j_wins = 0.0;
  double tie = 0.0;
};

RKProbabilities rao_kupper_probabilities(double pi_i, double pi_j,
                                         double theta);

double rao_kupper_log_likelihood(std::span<const Comparison> comparisons,
                                 const RKParams& params);

struct RaoKupperFit {
  RKParams params;
  double log_likelihood = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> log_likelihood_trace;  // one value per sweep
};

// Minorize-maximize updates of pi (normalized to sum 1) then theta, until the
// log-likelihood gain drops below `tolerance`. Without ties theta stays 1.
RaoKupperFit rao_kupper_fit(std::span<const Comparison> comparisons,
                            double tolerance = 1e-10,
                            std::size_t max_iterations = 10000);

ScoreTable rao_kupper_table(const RaoKupperFit& fit);

// ------------------------------------------------------------- common

// Left if s_left > s_right + gamma, right if s_right > s_left + gamma, else
// tie. Throws on ids missing from the table.
Outcome baseline_predict(const ScoreTable& table, const std::string& left_id,
                         const std::string& right_id, double gamma);

enum class BaselineMethod { kElo, kSkill, kRankCentrality, kRaoKupper };

BaselineMethod parse_baseline_method(const std::string& name);
std::string method_name(BaselineMethod method);

ScoreTable fit_baseline(BaselineMethod method,
                        std::span<const Comparison> comparisons);

}  // namespace pcs

#endif  // PCS_BASELINES_H_
