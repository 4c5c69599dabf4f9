#include "fmuxnet/fmux_function.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>

#include "fmuxnet/errors.hpp"

namespace fmuxnet {

FunctionSpec parse_function_spec(const std::string& name, int k, int alphabet_size) {
  FunctionSpec s;
  if (name == "parity") {
    s.kind = FunctionKind::parity;
  } else if (name == "max") {
    s.kind = FunctionKind::max;
  } else if (name == "kth") {
    s.kind = FunctionKind::kth;
  } else {
    throw BadParams("unknown function '" + name + "'");
  }
  s.k = k;
  s.alphabet_size = alphabet_size;
  return s;
}

std::string function_name(FunctionKind kind) {
  switch (kind) {
    case FunctionKind::parity: return "parity";
    case FunctionKind::max: return "max";
    case FunctionKind::kth: return "kth";
  }
  return "?";
}

FmuxFunction::FmuxFunction(FunctionSpec spec) : spec_(spec) {
  if (spec_.kind == FunctionKind::parity) {
    alphabet_ = 2;
    slots_ = 1;
  } else {
    alphabet_ = spec_.alphabet_size;
    if (alphabet_ < 2 || alphabet_ > 255) throw BadParams("alphabet size must lie in [2, 255]");
    slots_ = spec_.kind == FunctionKind::kth ? spec_.k : 1;
    if (slots_ < 1 || slots_ > kMaxOrder)
      throw BadParams("k must lie in [1, " + std::to_string(kMaxOrder) + "]");
  }
}

std::string FmuxFunction::name() const { return function_name(spec_.kind); }

Payload FmuxFunction::identity() const {
  Payload p;
  p.values.fill(spec_.kind == FunctionKind::parity ? 0 : kNoValue);
  return p;
}

Payload FmuxFunction::lift(int value) const {
  if (value < 0 || value >= alphabet_) throw ValueOutOfAlphabet(value, alphabet_);
  Payload p = identity();
  p.values[0] = value;
  return p;
}

Payload FmuxFunction::combine(const Payload& a, const Payload& b) const {
  Payload out = identity();
  switch (spec_.kind) {
    case FunctionKind::parity:
      out.values[0] = a.values[0] ^ b.values[0];
      break;
    case FunctionKind::max:
      out.values[0] = std::max(a.values[0], b.values[0]);
      break;
    case FunctionKind::kth: {
      // Merge two descending top-k lists.
      std::array<std::int32_t, 2 * kMaxOrder> merged{};
      std::merge(a.values.begin(), a.values.begin() + slots_, b.values.begin(),
                 b.values.begin() + slots_, merged.begin(), std::greater<>());
      std::copy_n(merged.begin(), slots_, out.values.begin());
      break;
    }
  }
  return out;
}

int FmuxFunction::finalize(const Payload& p) const {
  return spec_.kind == FunctionKind::kth ? p.values[slots_ - 1] : p.values[0];
}

Payload FmuxFunction::lift_and_combine(std::span<const int> values) const {
  if (values.empty()) throw BadParams("lift_and_combine needs at least one value");
  Payload acc = lift(values[0]);
  for (std::size_t i = 1; i < values.size(); ++i) acc = combine(acc, lift(values[i]));
  return acc;
}

int FmuxFunction::offline_evaluate(std::span<const int> sensed) const {
  for (int v : sensed)
    if (v < 0 || v >= alphabet_) throw ValueOutOfAlphabet(v, alphabet_);
  switch (spec_.kind) {
    case FunctionKind::parity: {
      int x = 0;
      for (int v : sensed) x ^= v;
      return x;
    }
    case FunctionKind::max: {
      int m = kNoValue;
      for (int v : sensed) m = std::max(m, v);
      return m;
    }
    case FunctionKind::kth: {
      std::vector<int> sorted(sensed.begin(), sensed.end());
      std::sort(sorted.begin(), sorted.end(), std::greater<>());
      return static_cast<int>(sorted.size()) >= slots_ ? sorted[slots_ - 1] : kNoValue;
    }
  }
  return kNoValue;
}

bool FmuxFunction::check_divisible(const std::vector<std::vector<std::size_t>>& partition,
                                   std::span<const int> values) const {
  std::vector<int> count(values.size(), 0);
  Payload acc = identity();
  for (const auto& part : partition) {
    if (part.empty()) continue;
    Payload local = identity();
    for (std::size_t idx : part) {
      if (idx >= values.size()) throw BadParams("partition index out of range");
      ++count[idx];
      local = combine(local, lift(values[idx]));
    }
    acc = combine(acc, local);
  }
  for (int c : count)
    if (c != 1) throw BadParams("not a partition of the sensor set");
  return finalize(acc) == offline_evaluate(values);
}

double FmuxFunction::range_size() const {
  switch (spec_.kind) {
    case FunctionKind::parity: return 2.0;
    case FunctionKind::max: return static_cast<double>(alphabet_);
    case FunctionKind::kth: {
      // C(|X| + k - 1, k)
      double r = 1.0;
      for (int i = 1; i <= slots_; ++i) r = r * (alphabet_ + i - 1) / i;
      return std::round(r);
    }
  }
  return 2.0;
}

double FmuxFunction::bits_per_packet() const {
  if (spec_.log2_range_override > 0.0) return spec_.log2_range_override;
  return std::log2(range_size());
}

std::vector<std::uint8_t> FmuxFunction::serialize(const Payload& p) const {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(slots_));
  // kNoValue maps to 0, real values to value + 1.
  for (int s = 0; s < slots_; ++s) {
    const int v = spec_.kind == FunctionKind::parity ? p.values[s] : p.values[s] + 1;
    out[static_cast<std::size_t>(s)] = static_cast<std::uint8_t>(v);
  }
  return out;
}

}  // namespace fmuxnet
