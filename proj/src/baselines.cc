#include "pcs/baselines.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

namespace pcs {
namespace {

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Dense index over the ids that occur in a comparison list.
struct IdIndex {
  std::vector<std::string> ids;
  std::map<std::string, std::size_t> index;

  explicit IdIndex(std::span<const Comparison> comparisons) {
    for (const Comparison& c : comparisons) {
      index.emplace(c.left_id, 0);
      index.emplace(c.right_id, 0);
    }
    for (auto& [id, k] : index) {
      k = ids.size();
      ids.push_back(id);
    }
  }
  std::size_t operator()(const std::string& id) const { return index.at(id); }
  std::size_t size() const { return ids.size(); }
};

// Aggregated outcomes of one unordered pair (a < b).
struct PairCounts {
  double a_wins = 0.0;
  double b_wins = 0.0;
  double ties = 0.0;
};

std::map<std::pair<std::size_t, std::size_t>, PairCounts> pair_counts(
    std::span<const Comparison> comparisons, const IdIndex& idx) {
  std::map<std::pair<std::size_t, std::size_t>, PairCounts> counts;
  for (const Comparison& c : comparisons) {
    std::size_t a = idx(c.left_id);
    std::size_t b = idx(c.right_id);
    Outcome y = c.outcome;
    if (a > b) {
      std::swap(a, b);
      y = negate(y);
    }
    PairCounts& pc = counts[{a, b}];
    switch (y) {
      case Outcome::kLeft: pc.a_wins += 1.0; break;
      case Outcome::kRight: pc.b_wins += 1.0; break;
      case Outcome::kTie: pc.ties += 1.0; break;
    }
  }
  return counts;
}

}  // namespace

double ScoreTable::score_or_default(const std::string& id) const {
  auto it = scores.find(id);
  return it == scores.end() ? default_score : it->second;
}

std::vector<Comparison> in_time_order(std::span<const Comparison> comparisons) {
  std::vector<Comparison> ordered(comparisons.begin(), comparisons.end());
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const Comparison& a, const Comparison& b) {
                     return a.created_at < b.created_at;
                   });
  return ordered;
}

// ---------------------------------------------------------------- Elo

void EloRater::update(const Comparison& c) {
  const double r_left = rating(c.left_id);
  const double r_right = rating(c.right_id);
  const double expected_left =
      1.0 / (1.0 + std::pow(10.0, (r_right - r_left) / config_.scale));
  double actual_left = 0.5;
  if (c.outcome == Outcome::kLeft) actual_left = 1.0;
  if (c.outcome == Outcome::kRight) actual_left = 0.0;
  const double delta = config_.k_factor * (actual_left - expected_left);
  ratings_[c.left_id] = r_left + delta;
  ratings_[c.right_id] = r_right - delta;
}

double EloRater::rating(const std::string& id) const {
  auto it = ratings_.find(id);
  return it == ratings_.end() ? config_.initial_rating : it->second;
}

ScoreTable EloRater::table() const {
  ScoreTable t;
  t.scores = ratings_;
  t.method = "elo";
  t.fitted_at = now_ms();
  t.default_score = config_.initial_rating;
  return t;
}

ScoreTable elo_fit(std::span<const Comparison> comparisons,
                   const EloConfig& config) {
  if (!(config.k_factor > 0.0) || !(config.scale > 0.0)) {
    throw Error("elo: k_factor and scale must be > 0");
  }
  EloRater rater(config);
  for (const Comparison& c : in_time_order(comparisons)) rater.update(c);
  return rater.table();
}

// ----------------------------------------------------------- skill

namespace truncation {

double v_win(double t, double epsilon) {
  const double x = t - epsilon;
  const double denom = normal_cdf(x);
  if (denom < 1e-300) return -x;
  return normal_pdf(x) / denom;
}

double w_win(double t, double epsilon) {
  const double v = v_win(t, epsilon);
  return v * (v + t - epsilon);
}

double v_draw(double t, double epsilon) {
  const double a = std::abs(t);
  const double denom = normal_cdf(epsilon - a) - normal_cdf(-epsilon - a);
  const double v = (normal_pdf(-epsilon - a) - normal_pdf(epsilon - a)) / denom;
  return t < 0.0 ? -v : v;
}

double w_draw(double t, double epsilon) {
  const double a = std::abs(t);
  const double denom = normal_cdf(epsilon - a) - normal_cdf(-epsilon - a);
  const double v = v_draw(a, epsilon);
  return v * v + ((epsilon - a) * normal_pdf(epsilon - a) +
                  (epsilon + a) * normal_pdf(epsilon + a)) /
                     denom;
}

}  // namespace truncation

double draw_margin(double draw_probability, double beta) {
  if (!(draw_probability >= 0.0 && draw_probability < 1.0)) {
    throw Error("draw_probability must be in [0, 1)");
  }
  if (draw_probability == 0.0) return 0.0;
  const boost::math::normal standard;
  return boost::math::quantile(standard, (draw_probability + 1.0) / 2.0) *
         std::numbers::sqrt2 * beta;
}

std::map<std::string, SkillRating> skill_ratings(
    std::span<const Comparison> comparisons, const SkillConfig& config) {
  const double beta = config.beta.value_or(config.sigma0 / 2.0);
  const double tau = config.tau.value_or(config.sigma0 / 100.0);
  double p_draw = 0.0;
  if (config.draw_probability) {
    p_draw = *config.draw_probability;
  } else if (!comparisons.empty()) {
    const auto ties = std::count_if(
        comparisons.begin(), comparisons.end(),
        [](const Comparison& c) { return is_tie(c.outcome); });
    p_draw = static_cast<double>(ties) / static_cast<double>(comparisons.size());
  }
  const double epsilon = draw_margin(p_draw, beta);

  std::map<std::string, SkillRating> ratings;
  auto get = [&](const std::string& id) -> SkillRating& {
    return ratings.try_emplace(id, SkillRating{config.mu0, config.sigma0})
        .first->second;
  };
  for (const Comparison& c : in_time_order(comparisons)) {
    SkillRating& left = get(c.left_id);
    SkillRating& right = get(c.right_id);
    const double var_l = left.sigma * left.sigma + tau * tau;
    const double var_r = right.sigma * right.sigma + tau * tau;
    const double c2 = 2.0 * beta * beta + var_l + var_r;
    const double cc = std::sqrt(c2);
    const double e = epsilon / cc;

    double v = 0.0;
    double w = 0.0;
    double sign = 1.0;  // +1 moves left up, right down
    if (is_tie(c.outcome)) {
      const double t = (left.mu - right.mu) / cc;
      v = truncation::v_draw(t, e);
      w = truncation::w_draw(t, e);
    } else {
      const bool left_won = c.outcome == Outcome::kLeft;
      sign = left_won ? 1.0 : -1.0;
      const double t = sign * (left.mu - right.mu) / cc;
      v = truncation::v_win(t, e);
      w = truncation::w_win(t, e);
    }
    if (!std::isfinite(v) || !std::isfinite(w)) {
      throw Error("skill update produced a non-finite value for (" +
                  c.left_id + ", " + c.right_id +
                  "); check draw_probability against the data");
    }
    left.mu += sign * var_l / cc * v;
    right.mu -= sign * var_r / cc * v;
    left.sigma = std::sqrt(var_l * std::max(0.0, 1.0 - var_l / c2 * w));
    right.sigma = std::sqrt(var_r * std::max(0.0, 1.0 - var_r / c2 * w));
  }
  return ratings;
}

ScoreTable skill_fit(std::span<const Comparison> comparisons,
                     const SkillConfig& config) {
  ScoreTable t;
  for (const auto& [id, r] : skill_ratings(comparisons, config)) {
    t.scores[id] = r.mu - 3.0 * r.sigma;
  }
  t.method = "skill";
  t.fitted_at = now_ms();
  t.default_score = config.mu0 - 3.0 * config.sigma0;
  return t;
}

// ------------------------------------------------------ Rank Centrality

ScoreTable rank_centrality(std::span<const Comparison> comparisons,
                           const RCConfig& config) {
  if (!(config.epsilon > 0.0)) throw Error("rank_centrality: epsilon must be > 0");
  const IdIndex idx(comparisons);
  const std::size_t n = idx.size();
  if (n < 2) throw Error("rank_centrality requires at least 2 items");
  const auto counts = pair_counts(comparisons, idx);

  // Transition (i -> j) carries the smoothed fraction of j beating i.
  struct Edge {
    std::size_t to;
    double p;
  };
  std::vector<std::vector<Edge>> out(n);
  for (const auto& [key, pc] : counts) {
    const auto [a, b] = key;
    const double total = pc.a_wins + pc.b_wins + pc.ties;
    const double half_ties = 0.5 * pc.ties;
    const double denom = total + 2.0 * config.epsilon;
    out[a].push_back({b, (pc.b_wins + half_ties + config.epsilon) / denom});
    out[b].push_back({a, (pc.a_wins + half_ties + config.epsilon) / denom});
  }
  // Components, found by union-find over compared pairs.
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto root = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& [key, pc] : counts) parent[root(key.first)] = root(key.second);
  std::size_t components = 0;
  for (std::size_t i = 0; i < n; ++i) components += root(i) == i;

  // Each component is a closed chain, so normalizing by its own maximum
  // degree leaves the stationary distribution unchanged and mixes faster.
  std::vector<std::size_t> d_max(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    d_max[root(i)] = std::max(d_max[root(i)], out[i].size());
  }
  std::vector<double> self(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (Edge& e : out[i]) {
      e.p /= static_cast<double>(d_max[root(i)]);
      self[i] -= e.p;
    }
  }

  std::vector<double> pi(n, 1.0 / static_cast<double>(n));
  std::vector<double> next(n);
  double residual = 0.0;
  std::size_t iter = 0;
  for (; iter < config.max_iterations; ++iter) {
    for (std::size_t i = 0; i < n; ++i) next[i] = pi[i] * self[i];
    for (std::size_t i = 0; i < n; ++i) {
      for (const Edge& e : out[i]) next[e.to] += pi[i] * e.p;
    }
    residual = 0.0;
    for (std::size_t i = 0; i < n; ++i) residual += std::abs(next[i] - pi[i]);
    pi.swap(next);
    if (residual < config.tolerance) break;
  }
  if (residual >= config.tolerance) {
    throw Error("rank_centrality did not converge after " +
                std::to_string(config.max_iterations) +
                " iterations (residual " + std::to_string(residual) + ")");
  }

  ScoreTable t;
  for (std::size_t i = 0; i < n; ++i) t.scores[idx.ids[i]] = pi[i];
  t.method = "rank_centrality";
  t.fitted_at = now_ms();
  t.default_score = 1.0 / static_cast<double>(n);
  t.n_components = components;
  return t;
}

// ---------------------------------------------------------- Rao-Kupper

RKProbabilities rao_kupper_probabilities(double pi_i, double pi_j,
                                         double theta) {
  const double d_i = pi_i + theta * pi_j;
  const double d_j = pi_j + theta * pi_i;
  RKProbabilities p;
  p.i_wins = pi_i / d_i;
  p.j_wins = pi_j / d_j;
  p.tie = (theta * theta - 1.0) * pi_i * pi_j / (d_i * d_j);
  return p;
}

namespace {

struct RKData {
  IdIndex idx;
  std::map<std::pair<std::size_t, std::size_t>, PairCounts> counts;
};

double rk_log_likelihood(const RKData& data, const std::vector<double>& pi,
                         double theta) {
  double ll = 0.0;
  for (const auto& [key, pc] : data.counts) {
    const auto p = rao_kupper_probabilities(pi[key.first], pi[key.second], theta);
    if (pc.a_wins > 0) ll += pc.a_wins * std::log(p.i_wins);
    if (pc.b_wins > 0) ll += pc.b_wins * std::log(p.j_wins);
    if (pc.ties > 0) ll += pc.ties * std::log(p.tie);
  }
  return ll;
}

}  // namespace

double rao_kupper_log_likelihood(std::span<const Comparison> comparisons,
                                 const RKParams& params) {
  RKData data{IdIndex(comparisons), {}};
  data.counts = pair_counts(comparisons, data.idx);
  std::vector<double> pi(data.idx.size());
  for (std::size_t k = 0; k < pi.size(); ++k) {
    auto it = params.pi.find(data.idx.ids[k]);
    if (it == params.pi.end()) {
      throw Error("rao_kupper: no strength for item '" + data.idx.ids[k] + "'");
    }
    pi[k] = it->second;
  }
  return rk_log_likelihood(data, pi, params.theta);
}

RaoKupperFit rao_kupper_fit(std::span<const Comparison> comparisons,
                            double tolerance, std::size_t max_iterations) {
  RKData data{IdIndex(comparisons), {}};
  const std::size_t n = data.idx.size();
  if (n < 2) throw Error("rao_kupper_fit requires at least 2 items");
  data.counts = pair_counts(comparisons, data.idx);

  // s[a][b]: wins of a over b plus ties between them, per ordered pair.
  std::vector<double> support(n, 0.0);
  double total_ties = 0.0;
  for (const auto& [key, pc] : data.counts) {
    support[key.first] += pc.a_wins + pc.ties;
    support[key.second] += pc.b_wins + pc.ties;
    total_ties += pc.ties;
  }

  std::vector<double> pi(n, 1.0 / static_cast<double>(n));
  double theta = total_ties > 0.0 ? 1.5 : 1.0;
  RaoKupperFit fit;
  double ll = rk_log_likelihood(data, pi, theta);
  fit.log_likelihood_trace.push_back(ll);

  std::vector<double> denom(n);
  for (std::size_t iter = 1; iter <= max_iterations; ++iter) {
    std::fill(denom.begin(), denom.end(), 0.0);
    for (const auto& [key, pc] : data.counts) {
      const auto [a, b] = key;
      const double s_ab = pc.a_wins + pc.ties;
      const double s_ba = pc.b_wins + pc.ties;
      const double d_ab = pi[a] + theta * pi[b];
      const double d_ba = pi[b] + theta * pi[a];
      denom[a] += s_ab / d_ab + theta * s_ba / d_ba;
      denom[b] += s_ba / d_ba + theta * s_ab / d_ab;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (denom[i] > 0.0) pi[i] = support[i] / denom[i];
    }
    const double sum = std::accumulate(pi.begin(), pi.end(), 0.0);
    for (double& v : pi) v /= sum;

    if (total_ties > 0.0) {
      double c = 0.0;
      for (const auto& [key, pc] : data.counts) {
        const auto [a, b] = key;
        const double s_ab = pc.a_wins + pc.ties;
        const double s_ba = pc.b_wins + pc.ties;
        c += s_ab * pi[b] / (pi[a] + theta * pi[b]);
        c += s_ba * pi[a] / (pi[b] + theta * pi[a]);
      }
      const double r = total_ties / c;
      theta = r + std::sqrt(1.0 + r * r);
    }

    const double next_ll = rk_log_likelihood(data, pi, theta);
    fit.log_likelihood_trace.push_back(next_ll);
    fit.iterations = iter;
    const double gain = next_ll - ll;
    ll = next_ll;
    if (std::abs(gain) < tolerance) {
      fit.converged = true;
      break;
    }
  }
  for (std::size_t i = 0; i < n; ++i) fit.params.pi[data.idx.ids[i]] = pi[i];
  fit.params.theta = theta;
  fit.log_likelihood = ll;
  return fit;
}

ScoreTable rao_kupper_table(const RaoKupperFit& fit) {
  ScoreTable t;
  t.scores = fit.params.pi;
  t.method = "rao_kupper";
  t.fitted_at = now_ms();
  t.default_score =
      fit.params.pi.empty() ? 0.0 : 1.0 / static_cast<double>(fit.params.pi.size());
  return t;
}

// ------------------------------------------------------------- common

Outcome baseline_predict(const ScoreTable& table, const std::string& left_id,
                         const std::string& right_id, double gamma) {
  auto l = table.scores.find(left_id);
  auto r = table.scores.find(right_id);
  if (l == table.scores.end()) throw Error("unscored item '" + left_id + "'");
  if (r == table.scores.end()) throw Error("unscored item '" + right_id + "'");
  if (l->second > r->second + gamma) return Outcome::kLeft;
  if (r->second > l->second + gamma) return Outcome::kRight;
  return Outcome::kTie;
}

BaselineMethod parse_baseline_method(const std::string& name) {
  if (name == "elo") return BaselineMethod::kElo;
  if (name == "skill" || name == "trueskill") return BaselineMethod::kSkill;
  if (name == "rc" || name == "rank_centrality") {
    return BaselineMethod::kRankCentrality;
  }
  if (name == "rk" || name == "rao_kupper") return BaselineMethod::kRaoKupper;
  throw Error("unknown baseline method '" + name + "'");
}

std::string method_name(BaselineMethod method) {
  switch (method) {
    case BaselineMethod::kElo: return "elo";
    case BaselineMethod::kSkill: return "skill";
    case BaselineMethod::kRankCentrality: return "rank_centrality";
    case BaselineMethod::kRaoKupper: return "rao_kupper";
  }
  return "unknown";
}

ScoreTable fit_baseline(BaselineMethod method,
                        std::span<const Comparison> comparisons) {
  switch (method) {
    case BaselineMethod::kElo: return elo_fit(comparisons);
    case BaselineMethod::kSkill: return skill_fit(comparisons);
    case BaselineMethod::kRankCentrality: return rank_centrality(comparisons);
    case BaselineMethod::kRaoKupper:
      return rao_kupper_table(rao_kupper_fit(comparisons));
  }
  throw Error("unknown baseline method");
}

}  // namespace pcs
