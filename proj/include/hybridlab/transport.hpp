#pragma once

// Dense min-cost transportation between two discrete distributions with real
// masses: successive shortest paths with Johnson potentials and an O(V^2)
// Dijkstra. Returns an optimal plan, which the bounded-Lipschitz search uses
// for exact supergradients.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "hybridlab/error.hpp"

namespace hybridlab {

struct TransportPlan {
  std::size_t sources = 0;
  std::size_t sinks = 0;
  std::vector<double> flow;  // sources x sinks, row-major
  double cost = 0.0;

  double operator()(std::size_t i, std::size_t j) const { return flow[i * sinks + j]; }
};

/// min sum c_ij x_ij  s.t.  sum_j x_ij = supply_i, sum_i x_ij = demand_j, x >= 0.
/// Demand is rescaled to the supply total if they differ by rounding.
inline TransportPlan solve_transport(std::span<const double> supply, std::span<const double> demand,
                                     std::span<const double> cost) {
  const std::size_t ns = supply.size(), nt = demand.size();
  if (ns == 0 || nt == 0 || cost.size() != ns * nt) {
    throw Error(ErrorKind::LPFailure, "transport problem has inconsistent sizes");
  }
  const double total_s = std::accumulate(supply.begin(), supply.end(), 0.0);
  const double total_t = std::accumulate(demand.begin(), demand.end(), 0.0);
  if (!(total_s > 0.0) || std::abs(total_s - total_t) > 1e-9 * total_s) {
    throw Error(ErrorKind::LPFailure, "supply and demand totals differ");
  }
  const double eps = 1e-14 * total_s;
  constexpr double kInf = std::numeric_limits<double>::infinity();

  std::vector<double> rem_s(supply.begin(), supply.end());
  std::vector<double> rem_t(nt);
  for (std::size_t j = 0; j < nt; ++j) rem_t[j] = demand[j] * (total_s / total_t);

  TransportPlan plan;
  plan.sources = ns;
  plan.sinks = nt;
  plan.flow.assign(ns * nt, 0.0);
  auto c = [&](std::size_t i, std::size_t j) { return cost[i * nt + j]; };

  std::vector<double> ps(ns, 0.0), pt(nt, kInf);
  for (std::size_t i = 0; i < ns; ++i) {
    for (std::size_t j = 0; j < nt; ++j) pt[j] = std::min(pt[j], c(i, j));
  }

  // Saturate tight edges first; flow on zero reduced cost keeps the plan optimal.
  for (std::size_t i = 0; i < ns; ++i) {
    for (std::size_t j = 0; j < nt && rem_s[i] > eps; ++j) {
      if (rem_t[j] <= eps || c(i, j) != pt[j]) continue;
      const double amount = std::min(rem_s[i], rem_t[j]);
      plan.flow[i * nt + j] += amount;
      rem_s[i] -= amount;
      rem_t[j] -= amount;
      if (rem_s[i] < eps) rem_s[i] = 0.0;
      if (rem_t[j] < eps) rem_t[j] = 0.0;
    }
  }

  std::vector<double> ds(ns), dt(nt);
  std::vector<char> done_s(ns), done_t(nt);
  std::vector<std::ptrdiff_t> pred_s(ns), pred_t(nt);
  double remaining = std::accumulate(rem_s.begin(), rem_s.end(), 0.0);
  const std::size_t max_rounds = 64 * (ns + nt) + 1024;

  for (std::size_t round = 0; remaining > eps * static_cast<double>(ns + nt); ++round) {
    if (round > max_rounds) throw Error(ErrorKind::LPFailure, "transport did not converge");
    std::fill(ds.begin(), ds.end(), kInf);
    std::fill(dt.begin(), dt.end(), kInf);
    std::fill(done_s.begin(), done_s.end(), 0);
    std::fill(done_t.begin(), done_t.end(), 0);
    std::fill(pred_s.begin(), pred_s.end(), -1);
    std::fill(pred_t.begin(), pred_t.end(), -1);
    for (std::size_t i = 0; i < ns; ++i) {
      if (rem_s[i] > eps) ds[i] = 0.0;
    }

    std::ptrdiff_t target = -1;
    double reach = kInf;
    for (;;) {
      double best = kInf;
      std::ptrdiff_t bs = -1, bt = -1;
      for (std::size_t i = 0; i < ns; ++i) {
        if (!done_s[i] && ds[i] < best) {
          best = ds[i];
          bs = static_cast<std::ptrdiff_t>(i);
        }
      }
      for (std::size_t j = 0; j < nt; ++j) {
        if (!done_t[j] && dt[j] < best) {
          best = dt[j];
          bt = static_cast<std::ptrdiff_t>(j);
          bs = -1;
        }
      }
      if (best == kInf) break;
      if (bs >= 0) {
        const auto i = static_cast<std::size_t>(bs);
        done_s[i] = 1;
        for (std::size_t j = 0; j < nt; ++j) {
          if (done_t[j]) continue;
          const double nd = ds[i] + std::max(0.0, c(i, j) + ps[i] - pt[j]);
          if (nd < dt[j]) {
            dt[j] = nd;
            pred_t[j] = bs;
          }
        }
      } else if (bt >= 0) {
        const auto j = static_cast<std::size_t>(bt);
        done_t[j] = 1;
        if (rem_t[j] > eps) {
          target = bt;
          reach = dt[j];
          break;
        }
        for (std::size_t i = 0; i < ns; ++i) {
          if (done_s[i] || plan.flow[i * nt + j] <= eps) continue;
          const double nd = dt[j] + std::max(0.0, pt[j] - c(i, j) - ps[i]);
          if (nd < ds[i]) {
            ds[i] = nd;
            pred_s[i] = bt;
          }
        }
      }
    }
    if (target < 0) throw Error(ErrorKind::LPFailure, "no augmenting path in transport");

    for (std::size_t i = 0; i < ns; ++i) ps[i] += std::min(ds[i], reach);
    for (std::size_t j = 0; j < nt; ++j) pt[j] += std::min(dt[j], reach);

    // Bottleneck along the path back to a root source.
    auto j = static_cast<std::size_t>(target);
    double amount = rem_t[j];
    std::size_t root = 0;
    for (;;) {
      const auto i = static_cast<std::size_t>(pred_t[j]);
      if (pred_s[i] < 0) {
        root = i;
        amount = std::min(amount, rem_s[i]);
        break;
      }
      j = static_cast<std::size_t>(pred_s[i]);
      amount = std::min(amount, plan.flow[i * nt + j]);
    }
    j = static_cast<std::size_t>(target);
    for (;;) {
      const auto i = static_cast<std::size_t>(pred_t[j]);
      plan.flow[i * nt + j] += amount;
      if (i == root && pred_s[i] < 0) break;
      j = static_cast<std::size_t>(pred_s[i]);
      plan.flow[i * nt + j] -= amount;
      if (plan.flow[i * nt + j] < eps) plan.flow[i * nt + j] = 0.0;
    }
    rem_s[root] -= amount;
    rem_t[static_cast<std::size_t>(target)] -= amount;
    if (rem_s[root] < eps) rem_s[root] = 0.0;
    if (rem_t[static_cast<std::size_t>(target)] < eps) rem_t[static_cast<std::size_t>(target)] = 0.0;
    remaining = std::accumulate(rem_s.begin(), rem_s.end(), 0.0);
  }

  for (std::size_t k = 0; k < plan.flow.size(); ++k) plan.cost += plan.flow[k] * cost[k];
  return plan;
}

}  // namespace hybridlab
