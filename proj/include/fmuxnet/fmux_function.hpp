#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fmuxnet {

enum class FunctionKind { parity, max, kth };

struct FunctionSpec {
  FunctionKind kind = FunctionKind::parity;
  int k = 2;                 // order for kth
  int alphabet_size = 16;    // |X|; parity always uses {0, 1}
  double log2_range_override = 0.0;  // > 0 replaces log2 |R(f)|
};

FunctionSpec parse_function_spec(const std::string& name, int k = 2, int alphabet_size = 16);
std::string function_name(FunctionKind kind);

inline constexpr int kMaxOrder = 8;
inline constexpr std::int32_t kNoValue = -1;  // stands in for minus infinity

// Constant-size packet contents. For kth, the k largest values seen in
// descending order, padded with kNoValue.
struct Payload {
  std::array<std::int32_t, kMaxOrder> values{};
  bool operator==(const Payload&) const = default;
};

// A fully-multiplexible function: payload size does not depend on how many
// sensor values have been merged, and combine is commutative and associative.
class FmuxFunction {
 public:
  explicit FmuxFunction(FunctionSpec spec);

  const FunctionSpec& spec() const { return spec_; }
  std::string name() const;
  int alphabet_size() const { return alphabet_; }

  Payload identity() const;
  // Throws ValueOutOfAlphabet.
  Payload lift(int value) const;
  Payload combine(const Payload& a, const Payload& b) const;
  int finalize(const Payload& p) const;

  // Fold of combine over the lifted values. Throws on an empty list.
  Payload lift_and_combine(std::span<const int> values) const;
  // Ground truth computed directly from all sensed values.
  int offline_evaluate(std::span<const int> sensed) const;
  // Combines per-part payloads and compares with offline_evaluate.
  bool check_divisible(const std::vector<std::vector<std::size_t>>& partition,
                       std::span<const int> values) const;

  // |R(f)|: 2 for parity, |X| for max, multisets of size k over X for kth.
  double range_size() const;
  double bits_per_packet() const;
  // Fixed-length wire encoding: one byte per payload slot in use.
  std::vector<std::uint8_t> serialize(const Payload& p) const;

 private:
  FunctionSpec spec_;
  int alphabet_;
  int slots_;
};

}  // namespace fmuxnet
