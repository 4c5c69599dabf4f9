#pragma once

#include <fmuxnet/graph.hpp>

#include <vector>

namespace fixtures {

// a = 0 with 1 -> a, 2 -> a, 2 -> 1.
inline fmuxnet::NetworkGraph triangle(double cap = 1.0) {
  return fmuxnet::NetworkGraph::build(3, 0, {{1, 0}, {2, 0}, {2, 1}}, {cap, cap, cap});
}

inline fmuxnet::NetworkGraph k5() {
  return fmuxnet::generate(fmuxnet::GraphKind::complete, {.nodes = 5});
}

// a <- 1 <- 2 <- ... <- n-1
inline fmuxnet::NetworkGraph line(int n, double cap = 1.0) {
  return fmuxnet::generate(fmuxnet::GraphKind::line, {.nodes = n, .capacity = cap});
}

}  // namespace fixtures
