#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace lfba {

inline constexpr int kMaxSwitches = 10;
inline constexpr int kDefaultSwitches = 4;

// Ordered binary states b1..bn, n in [1, kMaxSwitches]. Position 1 is the
// leftmost character of the textual form and the most significant bit of
// the class label.
template <typename Tag>
class BitVector {
 public:
  // All-off, default switch count.
  BitVector() = default;

  // All-off vector of length n.
  explicit BitVector(int n);
  explicit BitVector(const std::vector<int>& bits);

  int size() const { return n_; }

  // 1-based, matching the s1..sn numbering of the wall switches.
  bool at(int i) const;
  std::vector<int> bits() const;

  // Positional value with b1 as MSB.
  std::uint32_t packed() const { return mask_; }
  static BitVector from_packed(std::uint32_t mask, int n);

  friend bool operator==(const BitVector&, const BitVector&) = default;

 private:
  std::uint32_t mask_ = 0;
  int n_ = kDefaultSwitches;
};

struct SwitchTag {};
struct ControlTag {};

using SwitchVector = BitVector<SwitchTag>;
using ControlVector = BitVector<ControlTag>;

struct ClassLabel {
  int value = 0;
  int n = kDefaultSwitches;

  int num_classes() const { return 1 << n; }
  friend bool operator==(const ClassLabel&, const ClassLabel&) = default;
};

// Throws ValidationError when n is outside [1, kMaxSwitches].
void check_switch_count(int n);

// map^-1: switch states to the training label.
ClassLabel encode_label(const SwitchVector& s);

// map: predicted label to control signals.
ControlVector decode_label(const ClassLabel& y);

// Pushing switch i (1-based) flips its state.
SwitchVector toggle(const SwitchVector& s, int i);

// Same bits viewed as the other role; manual bypass is c <- s.
ControlVector as_controls(const SwitchVector& s);
SwitchVector as_switches(const ControlVector& c);

// "0010" <-> bits. Length of the text is n.
SwitchVector parse_bits(std::string_view text);
ControlVector parse_control_bits(std::string_view text);

template <typename Tag>
std::string format_bits(const BitVector<Tag>& v);

std::string format_label(const ClassLabel& y);

}  // namespace lfba
