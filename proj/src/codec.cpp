#include "lfba/codec.hpp"

#include "lfba/error.hpp"

namespace lfba {

void check_switch_count(int n) {
  if (n < 1 || n > kMaxSwitches) {
    throw ValidationError("switch count " + std::to_string(n) + " outside [1, " +
                          std::to_string(kMaxSwitches) + "]");
  }
}

template <typename Tag>
BitVector<Tag>::BitVector(int n) : n_(n) {
  check_switch_count(n);
}

template <typename Tag>
BitVector<Tag>::BitVector(const std::vector<int>& bits) : n_(static_cast<int>(bits.size())) {
  check_switch_count(n_);
  for (int i = 0; i < n_; ++i) {
    const int b = bits[static_cast<std::size_t>(i)];
    if (b != 0 && b != 1) {
      throw ValidationError("element " + std::to_string(i + 1) + " is not binary: " +
                            std::to_string(b));
    }
    mask_ = (mask_ << 1) | static_cast<std::uint32_t>(b);
  }
}

template <typename Tag>
bool BitVector<Tag>::at(int i) const {
  if (i < 1 || i > n_) {
    throw ValidationError("index " + std::to_string(i) + " outside [1, " + std::to_string(n_) + "]");
  }
  return (mask_ >> (n_ - i)) & 1U;
}

template <typename Tag>
std::vector<int> BitVector<Tag>::bits() const {
  std::vector<int> out(static_cast<std::size_t>(n_));
  for (int i = 0; i < n_; ++i) out[static_cast<std::size_t>(i)] = at(i + 1) ? 1 : 0;
  return out;
}

template <typename Tag>
BitVector<Tag> BitVector<Tag>::from_packed(std::uint32_t mask, int n) {
  BitVector v(n);
  if (mask >= (1U << n)) {
    throw ValidationError("packed value " + std::to_string(mask) + " needs more than " +
                          std::to_string(n) + " bits");
  }
  v.mask_ = mask;
  return v;
}

template class BitVector<SwitchTag>;
template class BitVector<ControlTag>;

ClassLabel encode_label(const SwitchVector& s) {
  check_switch_count(s.size());
  return ClassLabel{static_cast<int>(s.packed()), s.size()};
}

ControlVector decode_label(const ClassLabel& y) {
  check_switch_count(y.n);
  if (y.value < 0 || y.value >= y.num_classes()) {
    throw ValidationError("label " + std::to_string(y.value) + " outside [0, " +
                          std::to_string(y.num_classes()) + ")");
  }
  return ControlVector::from_packed(static_cast<std::uint32_t>(y.value), y.n);
}

SwitchVector toggle(const SwitchVector& s, int i) {
  if (i < 1 || i > s.size()) {
    throw ValidationError("switch index " + std::to_string(i) + " outside [1, " +
                          std::to_string(s.size()) + "]");
  }
  return SwitchVector::from_packed(s.packed() ^ (1U << (s.size() - i)), s.size());
}

ControlVector as_controls(const SwitchVector& s) {
  return ControlVector::from_packed(s.packed(), s.size());
}

SwitchVector as_switches(const ControlVector& c) {
  return SwitchVector::from_packed(c.packed(), c.size());
}

namespace {

template <typename V>
V parse_impl(std::string_view text) {
  if (text.empty()) throw ValidationError("empty bit string");
  if (text.size() > static_cast<std::size_t>(kMaxSwitches)) {
    throw ValidationError("bit string longer than " + std::to_string(kMaxSwitches) + ": \"" +
                          std::string(text) + "\"");
  }
  std::vector<int> bits;
  bits.reserve(text.size());
  for (char ch : text) {
    if (ch != '0' && ch != '1') {
      throw ValidationError("non-binary character in \"" + std::string(text) + "\"");
    }
    bits.push_back(ch - '0');
  }
  return V(bits);
}

}  // namespace

SwitchVector parse_bits(std::string_view text) { return parse_impl<SwitchVector>(text); }

ControlVector parse_control_bits(std::string_view text) { return parse_impl<ControlVector>(text); }

template <typename Tag>
std::string format_bits(const BitVector<Tag>& v) {
  std::string out(static_cast<std::size_t>(v.size()), '0');
  for (int i = 1; i <= v.size(); ++i) {
    if (v.at(i)) out[static_cast<std::size_t>(i - 1)] = '1';
  }
  return out;
}

template std::string format_bits(const SwitchVector&);
template std::string format_bits(const ControlVector&);

std::string format_label(const ClassLabel& y) { return format_bits(decode_label(y)); }

}  // namespace lfba
