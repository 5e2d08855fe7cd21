#pragma once

// Small dense two-phase simplex used only as a test oracle:
// maximise c.x subject to A x <= b, x >= 0.

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

namespace oracle {

class DenseSimplex {
 public:
  using Vec = std::vector<double>;
  using Mat = std::vector<Vec>;

  DenseSimplex(const Mat& A, const Vec& b, const Vec& c)
      : m_(static_cast<int>(b.size())), n_(static_cast<int>(c.size())), N_(n_ + 1), B_(m_),
        D_(m_ + 2, Vec(n_ + 2, 0.0)) {
    for (int i = 0; i < m_; ++i)
      for (int j = 0; j < n_; ++j) D_[i][j] = A[i][j];
    for (int i = 0; i < m_; ++i) {
      B_[i] = n_ + i;
      D_[i][n_] = -1;
      D_[i][n_ + 1] = b[i];
    }
    for (int j = 0; j < n_; ++j) {
      N_[j] = j;
      D_[m_][j] = -c[j];
    }
    N_[n_] = -1;
    D_[m_ + 1][n_] = 1;
  }

  // Optimal value; -inf if infeasible, +inf if unbounded.
  double solve(Vec& x) {
    int r = 0;
    for (int i = 1; i < m_; ++i)
      if (D_[i][n_ + 1] < D_[r][n_ + 1]) r = i;
    if (D_[r][n_ + 1] < -kEps) {
      pivot(r, n_);
      if (!simplex(1) || D_[m_ + 1][n_ + 1] < -kEps) return -std::numeric_limits<double>::infinity();
      for (int i = 0; i < m_; ++i) {
        if (B_[i] != -1) continue;
        int s = -1;
        for (int j = 0; j <= n_; ++j)
          if (s == -1 || D_[i][j] < D_[i][s] || (D_[i][j] == D_[i][s] && N_[j] < N_[s])) s = j;
        pivot(i, s);
      }
    }
    if (!simplex(2)) return std::numeric_limits<double>::infinity();
    x.assign(n_, 0.0);
    for (int i = 0; i < m_; ++i)
      if (B_[i] < n_) x[B_[i]] = D_[i][n_ + 1];
    return D_[m_][n_ + 1];
  }

 private:
  static constexpr double kEps = 1e-12;

  void pivot(int r, int s) {
    const double inv = 1.0 / D_[r][s];
    for (int i = 0; i < m_ + 2; ++i) {
      if (i == r) continue;
      for (int j = 0; j < n_ + 2; ++j)
        if (j != s) D_[i][j] -= D_[r][j] * D_[i][s] * inv;
    }
    for (int j = 0; j < n_ + 2; ++j)
      if (j != s) D_[r][j] *= inv;
    for (int i = 0; i < m_ + 2; ++i)
      if (i != r) D_[i][s] *= -inv;
    D_[r][s] = inv;
    std::swap(B_[r], N_[s]);
  }

  bool simplex(int phase) {
    const int x = phase == 1 ? m_ + 1 : m_;
    for (;;) {
      int s = -1;
      for (int j = 0; j <= n_; ++j) {
        if (phase == 2 && N_[j] == -1) continue;
        if (s == -1 || D_[x][j] < D_[x][s] || (D_[x][j] == D_[x][s] && N_[j] < N_[s])) s = j;
      }
      if (D_[x][s] > -kEps) return true;
      int r = -1;
      for (int i = 0; i < m_; ++i) {
        if (D_[i][s] < kEps) continue;
        if (r == -1) {
          r = i;
          continue;
        }
        const double lhs = D_[i][n_ + 1] / D_[i][s], rhs = D_[r][n_ + 1] / D_[r][s];
        if (lhs < rhs || (lhs == rhs && B_[i] < B_[r])) r = i;
      }
      if (r == -1) return false;
      pivot(r, s);
    }
  }

  int m_, n_;
  std::vector<int> N_, B_;
  Mat D_;
};

}  // namespace oracle
