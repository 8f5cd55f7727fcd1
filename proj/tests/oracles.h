// Independent reference implementations used by the tests. Nothing here
// calls into the library's own algorithms.
#ifndef PCS_TESTS_ORACLES_H_
#define PCS_TESTS_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "pcs/core.h"

namespace oracle {

// Solves A x = b by Gaussian elimination with partial pivoting.
inline std::vector<double> solve_dense(std::vector<std::vector<double>> a,
                                       std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    }
    std::swap(a[c], a[piv]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t r = n; r-- > 0;) {
    double s = b[r];
    for (std::size_t k = r + 1; k < n; ++k) s -= a[r][k] * x[k];
    x[r] = s / a[r][r];
  }
  return x;
}

// Rank Centrality on a connected comparison graph, built as a dense matrix
// and solved exactly: pi P = pi with sum(pi) = 1. Ties count half a win to
// each side; compared pairs get +eps pseudo-wins on both sides.
inline std::map<std::string, double> rank_centrality_dense(
    const std::vector<pcs::Comparison>& cs, double eps) {
  std::vector<std::string> ids;
  for (const auto& c : cs) {
    ids.push_back(c.left_id);
    ids.push_back(c.right_id);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  const std::size_t n = ids.size();
  auto at = [&](const std::string& id) {
    return static_cast<std::size_t>(
        std::lower_bound(ids.begin(), ids.end(), id) - ids.begin());
  };
  // wins[i][j]: times i beat j (ties as 0.5 each); games[i][j]: times compared.
  std::vector<std::vector<double>> wins(n, std::vector<double>(n, 0.0));
  std::vector<std::vector<double>> games(n, std::vector<double>(n, 0.0));
  for (const auto& c : cs) {
    const std::size_t l = at(c.left_id), r = at(c.right_id);
    games[l][r] += 1;
    games[r][l] += 1;
    if (c.outcome == pcs::Outcome::kLeft) wins[l][r] += 1;
    if (c.outcome == pcs::Outcome::kRight) wins[r][l] += 1;
    if (c.outcome == pcs::Outcome::kTie) {
      wins[l][r] += 0.5;
      wins[r][l] += 0.5;
    }
  }
  std::size_t dmax = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t d = 0;
    for (std::size_t j = 0; j < n; ++j) d += games[i][j] > 0;
    dmax = std::max(dmax, d);
  }
  std::vector<std::vector<double>> p(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || games[i][j] == 0) continue;
      p[i][j] = (wins[j][i] + eps) / (games[i][j] + 2 * eps) / dmax;
      row += p[i][j];
    }
    p[i][i] = 1.0 - row;
  }
  // (P^T - I) pi = 0, last equation replaced by the normalization.
  std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
  std::vector<double> b(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) a[i][j] = p[j][i] - (i == j ? 1.0 : 0.0);
  }
  for (std::size_t j = 0; j < n; ++j) a[n - 1][j] = 1.0;
  b[n - 1] = 1.0;
  const auto pi = solve_dense(a, b);
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < n; ++i) out[ids[i]] = pi[i];
  return out;
}

// Rao-Kupper log-likelihood written directly from the model definition.
inline double rk_loglik(const std::vector<pcs::Comparison>& cs,
                        const std::map<std::string, double>& pi, double theta) {
  double ll = 0.0;
  for (const auto& c : cs) {
    const double a = pi.at(c.left_id), b = pi.at(c.right_id);
    const double pa = a / (a + theta * b);
    const double pb = b / (b + theta * a);
    switch (c.outcome) {
      case pcs::Outcome::kLeft: ll += std::log(pa); break;
      case pcs::Outcome::kRight: ll += std::log(pb); break;
      case pcs::Outcome::kTie: ll += std::log(1.0 - pa - pb); break;
    }
  }
  return ll;
}

struct GridMax {
  double ll = -1e300;
  std::map<std::string, double> pi;
  double theta = 1.0;
  // Largest log-likelihood change between the argmax and a grid neighbour.
  double resolution = 0.0;
};

// Exhaustive search over the 3-item simplex (step 0.01, strictly positive)
// times theta in [1, 5] (step 0.01).
inline GridMax rk_grid_search(const std::vector<pcs::Comparison>& cs,
                              const std::string& a, const std::string& b,
                              const std::string& c) {
  GridMax best;
  int bi = 0, bj = 0, bt = 0;
  // Aggregate outcomes by index pair so each grid point costs O(1).
  const std::string names[3] = {a, b, c};
  auto idx = [&](const std::string& id) {
    for (int k = 0; k < 3; ++k) {
      if (names[k] == id) return k;
    }
    return -1;
  };
  double win[3][3] = {};
  double tie[3][3] = {};
  for (const auto& x : cs) {
    const int l = idx(x.left_id), r = idx(x.right_id);
    if (x.outcome == pcs::Outcome::kLeft) win[l][r] += 1;
    if (x.outcome == pcs::Outcome::kRight) win[r][l] += 1;
    if (x.outcome == pcs::Outcome::kTie) tie[std::min(l, r)][std::max(l, r)] += 1;
  }
  auto ll_at = [&](int i, int j, int t) {
    const double p[3] = {i / 100.0, j / 100.0, (100 - i - j) / 100.0};
    const double th = 1.0 + t / 100.0;
    double ll = 0.0;
    for (int u = 0; u < 3; ++u) {
      for (int v = 0; v < 3; ++v) {
        if (u == v) continue;
        if (win[u][v] > 0) ll += win[u][v] * std::log(p[u] / (p[u] + th * p[v]));
        if (u < v && tie[u][v] > 0) {
          const double pu = p[u] / (p[u] + th * p[v]);
          const double pv = p[v] / (p[v] + th * p[u]);
          ll += tie[u][v] * std::log(1.0 - pu - pv);
        }
      }
    }
    return ll;
  };
  for (int i = 1; i <= 98; ++i) {
    for (int j = 1; i + j <= 99; ++j) {
      for (int t = 0; t <= 400; ++t) {
        const double ll = ll_at(i, j, t);
        if (ll > best.ll) {
          best.ll = ll;
          bi = i;
          bj = j;
          bt = t;
        }
      }
    }
  }
  best.pi = {{a, bi / 100.0}, {b, bj / 100.0}, {c, (100 - bi - bj) / 100.0}};
  best.theta = 1.0 + bt / 100.0;
  for (int di = -1; di <= 1; ++di) {
    for (int dj = -1; dj <= 1; ++dj) {
      for (int dt = -1; dt <= 1; ++dt) {
        const int i = bi + di, j = bj + dj, t = bt + dt;
        if (i < 1 || j < 1 || i + j > 99 || t < 0 || t > 400) continue;
        best.resolution = std::max(best.resolution, best.ll - ll_at(i, j, t));
      }
    }
  }
  return best;
}

// Brute-force count of within-respondent pairs: every unordered pair of
// distinct items rated by the same respondent.
inline std::size_t brute_force_pair_count(
    const std::vector<std::pair<std::string, std::string>>& user_item) {
  std::size_t count = 0;
  for (std::size_t a = 0; a < user_item.size(); ++a) {
    for (std::size_t b = a + 1; b < user_item.size(); ++b) {
      if (user_item[a].first == user_item[b].first &&
          user_item[a].second != user_item[b].second) {
        ++count;
      }
    }
  }
  return count;
}

}  // namespace oracle

#endif  // PCS_TESTS_ORACLES_H_
