#pragma once

// Shared system builders for the test suites.

#include "holoform/spaces.hpp"

namespace holoform::testing {

// X = {x0}, tau(z) = z/2, gamma = 1/2.
inline ContractiveIFS halfmap(int nodes = 65) {
  return ContractiveIFS::affine(BaseSpace::singleton(),
                                FiberSpace::grid(nodes),
                                {{0.5, 0.0}}, 0.5);
}

// X = {0,1} with the discrete metric, branches z/2 and z/2 + 1/2.
inline ContractiveIFS doubling(int nodes = 257) {
  return ContractiveIFS::affine(BaseSpace::discrete(2),
                                FiberSpace::grid(nodes),
                                {{0.5, 0.0}, {0.5, 0.5}}, 0.5);
}

// X = {0,1}, branches z/3 and z/3 + 2/3 (middle-third attractor).
inline ContractiveIFS cantor(int nodes = 513) {
  return ContractiveIFS::affine(BaseSpace::discrete(2),
                                FiberSpace::grid(nodes),
                                {{1.0 / 3.0, 0.0}, {1.0 / 3.0, 2.0 / 3.0}},
                                1.0 / 3.0);
}

// Singleton fiber over a d-point base: the finite-example setting.
inline ContractiveIFS singleton_fiber(int d) {
  std::vector<std::vector<int>> tables(d, std::vector<int>{0});
  return ContractiveIFS::table(BaseSpace::discrete(d),
                               FiberSpace::singleton(), std::move(tables), 0.5);
}

// Truncated binary shift: the fiber holds the 2^k words w1..wk with the
// ultrametric d(u,v) = (1/2)^{cp+1} (cp = common prefix length), and branch
// x prepends the symbol x and drops the last one. Exactly gamma = 1/2.
inline ContractiveIFS word_shift(int k) {
  const int m = 1 << k;
  std::vector<std::string> labels(m);
  MatrixXd metric = MatrixXd::Zero(m, m);
  auto bit = [k](int w, int pos) { return (w >> (k - 1 - pos)) & 1; };
  for (int u = 0; u < m; ++u) {
    std::string s;
    for (int pos = 0; pos < k; ++pos) s += static_cast<char>('0' + bit(u, pos));
    labels[u] = s;
    for (int v = 0; v < m; ++v) {
      if (u == v) continue;
      int cp = 0;
      while (cp < k && bit(u, cp) == bit(v, cp)) ++cp;
      metric(u, v) = std::pow(0.5, cp + 1);
    }
  }
  std::vector<std::vector<int>> tables(2, std::vector<int>(m));
  for (int x = 0; x < 2; ++x) {
    for (int w = 0; w < m; ++w) tables[x][w] = x * (m / 2) + (w >> 1);
  }
  return ContractiveIFS::table(BaseSpace::discrete(2),
                               FiberSpace::finite(labels, metric),
                               std::move(tables), 0.5);
}

}  // namespace holoform::testing
