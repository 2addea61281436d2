#pragma once
// One-to-one matching of predicted modes to reference modes.

#include <algorithm>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "postval/core.hpp"
#include "postval/localization.hpp"

namespace postval {

struct Match {
  std::size_t pred = 0;
  std::size_t ref = 0;
  double score = 0.0;
  bool operator==(const Match&) const = default;
};

struct MatchResult {
  std::vector<Match> matches;
  std::vector<std::size_t> unmatched_pred;  // FP candidates
  std::vector<std::size_t> unmatched_ref;   // FN
  /// Admissible predictions on an already hit reference (fixed-threshold
  /// strategy only); counted as neither TP nor FP.
  std::vector<std::size_t> surplus_pred;
  /// Unmatched predictions found plausible by resimulation; not FP.
  std::vector<std::size_t> plausible_pred;
  std::vector<std::optional<double>> pred_confidence;
  std::size_t num_preds = 0;
  std::size_t num_refs = 0;
  bool fp_upper_bound = false;

  double total_score() const {
    double s = 0.0;
    for (const Match& m : matches) s += m.score;
    return s;
  }
  bool operator==(const MatchResult&) const = default;
};

enum class AssignmentStrategy { GreedyByScore, GreedyByLocalization, Hungarian, Threshold };

inline std::string_view to_string(AssignmentStrategy s) {
  switch (s) {
    case AssignmentStrategy::GreedyByScore: return "greedy_by_score";
    case AssignmentStrategy::GreedyByLocalization: return "greedy_by_localization";
    case AssignmentStrategy::Hungarian: return "hungarian";
    case AssignmentStrategy::Threshold: return "threshold";
  }
  return "?";
}

inline std::optional<AssignmentStrategy> parse_assignment_strategy(std::string_view s) {
  for (auto a : {AssignmentStrategy::GreedyByScore, AssignmentStrategy::GreedyByLocalization,
                 AssignmentStrategy::Hungarian, AssignmentStrategy::Threshold})
    if (to_string(a) == s) return a;
  return std::nullopt;
}

/// Localization scores, rows = predictions, columns = references.
using ScoreMatrix = std::vector<Vector>;

inline ScoreMatrix score_matrix(std::span<const Mode> preds, std::span<const Mode> refs,
                                const LocalizationCriterion& criterion) {
  criterion.validate();
  ScoreMatrix s(preds.size(), Vector(refs.size()));
  for (std::size_t i = 0; i < preds.size(); ++i)
    for (std::size_t j = 0; j < refs.size(); ++j) s[i][j] = criterion.score(preds[i], refs[j], i);
  return s;
}

namespace detail {

inline MatchResult finish(std::vector<Match> matches, std::span<const Mode> preds, std::size_t num_refs,
                          std::vector<std::size_t> surplus = {}) {
  MatchResult r;
  std::sort(matches.begin(), matches.end(), [](const Match& a, const Match& b) {
    return std::tie(a.pred, a.ref) < std::tie(b.pred, b.ref);
  });
  std::vector<bool> pred_used(preds.size(), false), ref_used(num_refs, false);
  for (const Match& m : matches) pred_used[m.pred] = ref_used[m.ref] = true;
  for (std::size_t i : surplus) pred_used[i] = true;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (!pred_used[i]) r.unmatched_pred.push_back(i);
  for (std::size_t j = 0; j < num_refs; ++j)
    if (!ref_used[j]) r.unmatched_ref.push_back(j);
  std::sort(surplus.begin(), surplus.end());
  r.matches = std::move(matches);
  r.surplus_pred = std::move(surplus);
  r.num_preds = preds.size();
  r.num_refs = num_refs;
  for (const Mode& m : preds) r.pred_confidence.push_back(m.confidence);
  return r;
}

}  // namespace detail

enum class GreedyOrder { ByScore, ByLocalization };

/// Greedy matching. ByScore visits predictions by descending confidence and
/// gives each the closest free admissible reference; ByLocalization takes
/// admissible pairs in ascending score order. Ties go to lower indices.
inline MatchResult greedy_assign(std::span<const Mode> preds, std::span<const Mode> refs,
                                 const LocalizationCriterion& criterion, GreedyOrder order) {
  if (order == GreedyOrder::ByScore)
    for (std::size_t i = 0; i < preds.size(); ++i)
      if (!preds[i].confidence)
        throw InvalidArgument("greedy matching by score needs a confidence on " + preds[i].name(i));
  const ScoreMatrix s = score_matrix(preds, refs, criterion);
  std::vector<bool> ref_used(refs.size(), false);
  std::vector<Match> matches;
  if (order == GreedyOrder::ByScore) {
    std::vector<std::size_t> idx(preds.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return *preds[a].confidence > *preds[b].confidence; });
    for (std::size_t i : idx) {
      std::optional<std::size_t> best;
      for (std::size_t j = 0; j < refs.size(); ++j)
        if (!ref_used[j] && criterion.admissible(s[i][j]) && (!best || s[i][j] < s[i][*best])) best = j;
      if (best) {
        ref_used[*best] = true;
        matches.push_back({i, *best, s[i][*best]});
      }
    }
  } else {
    std::vector<Match> pairs;
    for (std::size_t i = 0; i < preds.size(); ++i)
      for (std::size_t j = 0; j < refs.size(); ++j)
        if (criterion.admissible(s[i][j])) pairs.push_back({i, j, s[i][j]});
    std::sort(pairs.begin(), pairs.end(), [](const Match& a, const Match& b) {
      return std::tie(a.score, a.pred, a.ref) < std::tie(b.score, b.pred, b.ref);
    });
    std::vector<bool> pred_used(preds.size(), false);
    for (const Match& p : pairs) {
      if (pred_used[p.pred] || ref_used[p.ref]) continue;
      pred_used[p.pred] = ref_used[p.ref] = true;
      matches.push_back(p);
    }
  }
  return detail::finish(std::move(matches), preds, refs.size());
}

/// Minimum-cost square assignment (shortest augmenting path, O(n^3)).
/// Returns the column assigned to each row.
inline std::vector<std::size_t> solve_assignment(const std::vector<Vector>& cost) {
  const std::size_t n = cost.size();
  if (n == 0) return {};
  const double inf = std::numeric_limits<double>::infinity();
  Vector u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    Vector minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n);
  for (std::size_t j = 1; j <= n; ++j) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

/// Optimal matching restricted to admissible pairs: maximizes the number of
/// matches, then minimizes the summed localization score.
inline MatchResult hungarian_assign(std::span<const Mode> preds, std::span<const Mode> refs,
                                    const LocalizationCriterion& criterion) {
  const ScoreMatrix s = score_matrix(preds, refs, criterion);
  return detail::finish(
      [&] {
        const std::size_t n = std::max(preds.size(), refs.size());
        double big = 1.0;
        for (std::size_t i = 0; i < preds.size(); ++i)
          for (std::size_t j = 0; j < refs.size(); ++j)
            if (criterion.admissible(s[i][j])) big += std::abs(s[i][j]);
        std::vector<Vector> cost(n, Vector(n, big));
        for (std::size_t i = 0; i < preds.size(); ++i)
          for (std::size_t j = 0; j < refs.size(); ++j)
            if (criterion.admissible(s[i][j])) cost[i][j] = s[i][j];
        const auto assignment = solve_assignment(cost);
        std::vector<Match> matches;
        for (std::size_t i = 0; i < preds.size(); ++i) {
          const std::size_t j = assignment[i];
          if (j < refs.size() && criterion.admissible(s[i][j])) matches.push_back({i, j, s[i][j]});
        }
        return matches;
      }(),
      preds, refs.size());
}

/// Fixed-threshold coverage: each prediction attaches to its closest
/// admissible reference; a reference with at least one attached prediction is
/// hit and its lowest-scoring prediction becomes the recorded match. The other
/// attached predictions are surplus.
inline MatchResult threshold_assign(std::span<const Mode> preds, std::span<const Mode> refs,
                                    const LocalizationCriterion& criterion) {
  const ScoreMatrix s = score_matrix(preds, refs, criterion);
  std::vector<std::optional<std::size_t>> rep(refs.size());
  std::vector<std::size_t> attached;
  std::vector<std::size_t> attached_ref;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    std::optional<std::size_t> best;
    for (std::size_t j = 0; j < refs.size(); ++j)
      if (criterion.admissible(s[i][j]) && (!best || s[i][j] < s[i][*best])) best = j;
    if (!best) continue;
    attached.push_back(i);
    attached_ref.push_back(*best);
    auto& r = rep[*best];
    if (!r || s[i][*best] < s[*r][*best]) r = i;
  }
  std::vector<Match> matches;
  for (std::size_t j = 0; j < refs.size(); ++j)
    if (rep[j]) matches.push_back({*rep[j], j, s[*rep[j]][j]});
  std::vector<std::size_t> surplus;
  for (std::size_t k = 0; k < attached.size(); ++k)
    if (rep[attached_ref[k]] != attached[k]) surplus.push_back(attached[k]);
  return detail::finish(std::move(matches), preds, refs.size(), std::move(surplus));
}

inline MatchResult assign(std::span<const Mode> preds, std::span<const Mode> refs,
                          const LocalizationCriterion& criterion, AssignmentStrategy strategy) {
  switch (strategy) {
    case AssignmentStrategy::GreedyByScore: return greedy_assign(preds, refs, criterion, GreedyOrder::ByScore);
    case AssignmentStrategy::GreedyByLocalization:
      return greedy_assign(preds, refs, criterion, GreedyOrder::ByLocalization);
    case AssignmentStrategy::Hungarian: return hungarian_assign(preds, refs, criterion);
    case AssignmentStrategy::Threshold: return threshold_assign(preds, refs, criterion);
  }
  throw InvalidArgument("unknown assignment strategy");
}

/// FP counts are only an upper bound when the reference may miss valid modes
/// and no resimulation settled the unmatched predictions.
inline bool fp_is_upper_bound(Granularity g, bool resimulated) {
  return g == Granularity::NonExhaustiveModes && !resimulated;
}

}  // namespace postval
