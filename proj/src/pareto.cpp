#include <algorithm>
#include <cmath>
#include <numeric>

#include "mmpc/search.hpp"

namespace mmpc {

bool dominates(const ParetoPoint& a, const ParetoPoint& b) {
  return a.x >= b.x && a.y >= b.y && (a.x > b.x || a.y > b.y);
}

std::vector<std::size_t> pareto_front(std::span<const ParetoPoint> points) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!std::isnan(points[i].x) && !std::isnan(points[i].y)) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (points[a].x != points[b].x) return points[a].x > points[b].x;
    return points[a].y > points[b].y;
  });

  // Sweep in decreasing x. A group of equal x survives only at its top y,
  // and only if that y beats everything with strictly larger x.
  std::vector<std::size_t> front;
  double best_y = -INFINITY;
  bool first = true;
  for (std::size_t g = 0; g < order.size();) {
    std::size_t end = g;
    while (end < order.size() && points[order[end]].x == points[order[g]].x) ++end;
    const double top = points[order[g]].y;
    if (first || top > best_y) {
      for (std::size_t k = g; k < end && points[order[k]].y == top; ++k) front.push_back(order[k]);
      best_y = top;
      first = false;
    }
    g = end;
  }
  std::stable_sort(front.begin(), front.end(), [&](std::size_t a, std::size_t b) {
    if (points[a].y != points[b].y) return points[a].y < points[b].y;
    return a < b;
  });
  return front;
}

std::vector<std::size_t> pareto_front(std::span<const CandidateResult> results) {
  std::vector<ParetoPoint> pts;
  std::vector<std::size_t> map;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i].status != CandidateStatus::kComplete) continue;
    pts.push_back({results[i].efficiency, results[i].mean_rate});
    map.push_back(i);
  }
  auto front = pareto_front(std::span<const ParetoPoint>(pts));
  for (auto& i : front) i = map[i];
  return front;
}

std::vector<ResultRow> pareto_rows(std::span<const ResultRow> rows, bool per_arch) {
  auto front_of = [](const std::vector<ResultRow>& subset) {
    std::vector<ParetoPoint> pts;
    for (const auto& r : subset) pts.push_back({r.efficiency, r.mean_rate});
    std::vector<ResultRow> out;
    for (auto i : pareto_front(std::span<const ParetoPoint>(pts))) out.push_back(subset[i]);
    return out;
  };
  if (!per_arch) return front_of({rows.begin(), rows.end()});

  std::vector<std::pair<int, int>> archs;
  for (const auto& r : rows) {
    if (std::find(archs.begin(), archs.end(), std::pair{r.c_out, r.d_fcl}) == archs.end()) {
      archs.emplace_back(r.c_out, r.d_fcl);
    }
  }
  std::sort(archs.begin(), archs.end());
  std::vector<ResultRow> out;
  for (const auto& [c, d] : archs) {
    std::vector<ResultRow> subset;
    for (const auto& r : rows) {
      if (r.c_out == c && r.d_fcl == d) subset.push_back(r);
    }
    for (auto& r : front_of(subset)) out.push_back(std::move(r));
  }
  return out;
}

TradeoffGains tradeoff_gains(std::span<const ParetoPoint> front, std::span<const ParetoPoint> reference) {
  TradeoffGains gains;
  for (const auto& ref : reference) {
    if (!(ref.x > 0.0) || !(ref.y > 0.0)) continue;
    for (const auto& f : front) {
      if (f.y >= ref.y) gains.efficiency_gain_at_rate = std::max(gains.efficiency_gain_at_rate, f.x / ref.x);
      if (f.x >= ref.x) gains.rate_gain_at_efficiency = std::max(gains.rate_gain_at_efficiency, f.y / ref.y);
    }
  }
  return gains;
}

}  // namespace mmpc
