#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace fmuxnet {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GraphError : public Error {
 public:
  using Error::Error;
};

class DuplicateLink : public GraphError {
 public:
  DuplicateLink(int from, int to)
      : GraphError("duplicate link " + std::to_string(from) + "->" + std::to_string(to)),
        from(from), to(to) {}
  int from;
  int to;
};

class SelfLoop : public GraphError {
 public:
  explicit SelfLoop(int node)
      : GraphError("self-loop at node " + std::to_string(node)), node(node) {}
  int node;
};

class UnreachableAggregator : public GraphError {
 public:
  explicit UnreachableAggregator(int node)
      : GraphError("node " + std::to_string(node) + " has no directed path to the aggregator"),
        node(node) {}
  int node;
};

class NegativeCapacity : public GraphError {
 public:
  NegativeCapacity(int from, int to, double value)
      : GraphError("negative capacity " + std::to_string(value) + " on link " +
                   std::to_string(from) + "->" + std::to_string(to)),
        from(from), to(to) {}
  int from;
  int to;
};

class CycleError : public GraphError {
 public:
  explicit CycleError(std::vector<int> cycle)
      : GraphError(describe(cycle)), cycle(std::move(cycle)) {}
  std::vector<int> cycle;

 private:
  static std::string describe(const std::vector<int>& c) {
    std::string s = "graph contains a cycle:";
    for (int n : c) s += " " + std::to_string(n);
    return s;
  }
};

class BadParams : public Error {
 public:
  using Error::Error;
};

class TooManyTrees : public Error {
 public:
  explicit TooManyTrees(std::size_t limit)
      : Error("aggregation tree count exceeds limit " + std::to_string(limit)), limit(limit) {}
  std::size_t limit;
};

class LPNumericalFailure : public Error {
 public:
  using Error::Error;
};

class ValueOutOfAlphabet : public Error {
 public:
  ValueOutOfAlphabet(int value, int alphabet_size)
      : Error("value " + std::to_string(value) + " outside alphabet of size " +
              std::to_string(alphabet_size)) {}
};

// Fatal: in-network aggregation produced a value different from the offline result.
class OracleMismatch : public Error {
 public:
  using Error::Error;
};

class MultiTreeConfig : public Error {
 public:
  using Error::Error;
};

class SeriesTooShort : public Error {
 public:
  using Error::Error;
};

// Raised when a runtime invariant check fails (footprint validity, Type-AT, ...).
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace fmuxnet
