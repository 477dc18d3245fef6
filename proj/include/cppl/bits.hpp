#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cppl {

using Width = std::uint32_t;

// Thrown when a caller breaks an operation's width contract. These are
// internal assertions: checked designs never trigger them.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Fixed-width unsigned bit vector. Invariant: bits < 2^width.
class Value {
 public:
  Value() = default;

  Value(Width width, std::uint64_t bits) : width_(width), words_(word_count(width), 0) {
    if (width == 0) throw ContractViolation("Value width must be >= 1");
    words_[0] = bits;
    if (width < 64 && (bits >> width) != 0)
      throw ContractViolation("value " + std::to_string(bits) + " does not fit in " +
                              std::to_string(width) + " bits");
  }

  static Value zero(Width width) { return Value(width, 0); }

  static Value ones(Width width) {
    Value v = zero(width);
    std::fill(v.words_.begin(), v.words_.end(), ~std::uint64_t{0});
    v.mask_top();
    return v;
  }

  // Truncating constructor: keeps the low `width` bits of `bits`.
  static Value truncate(Width width, std::uint64_t bits) {
    Value v = zero(width);
    v.words_[0] = bits;
    v.mask_top();
    return v;
  }

  // Parses "0x"-prefixed hex text. Returns nullopt on malformed text or when
  // the value needs more than `width` bits.
  static std::optional<Value> from_hex(std::string_view text, Width width) {
    if (width == 0 || text.size() < 3 || text[0] != '0' || (text[1] != 'x' && text[1] != 'X'))
      return std::nullopt;
    Value v = zero(width);
    std::uint64_t bitpos = 0;
    for (auto it = text.rbegin(); it != text.rend() - 2; ++it) {
      const char ch = *it;
      std::uint64_t nibble = 0;
      if (ch >= '0' && ch <= '9') nibble = static_cast<std::uint64_t>(ch - '0');
      else if (ch >= 'a' && ch <= 'f') nibble = static_cast<std::uint64_t>(ch - 'a' + 10);
      else if (ch >= 'A' && ch <= 'F') nibble = static_cast<std::uint64_t>(ch - 'A' + 10);
      else if (ch == '_') continue;
      else return std::nullopt;
      for (int b = 0; b < 4; ++b, ++bitpos) {
        if (((nibble >> b) & 1U) == 0) continue;
        if (bitpos >= width) return std::nullopt;
        v.words_[bitpos / 64] |= std::uint64_t{1} << (bitpos % 64);
      }
    }
    return v;
  }

  Width width() const { return width_; }
  const std::vector<std::uint64_t>& words() const { return words_; }

  bool bit(Width i) const {
    if (i >= width_) return false;
    return ((words_[i / 64] >> (i % 64)) & 1U) != 0;
  }

  bool is_zero() const {
    return std::all_of(words_.begin(), words_.end(), [](std::uint64_t w) { return w == 0; });
  }

  bool fits_u64() const {
    return std::all_of(words_.begin() + 1, words_.end(), [](std::uint64_t w) { return w == 0; });
  }

  std::uint64_t to_u64() const {
    if (!fits_u64()) throw ContractViolation("value does not fit in 64 bits");
    return words_[0];
  }

  std::string to_hex() const {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    const Width nibbles = (width_ + 3) / 4;
    for (Width n = nibbles; n-- > 0;) {
      unsigned nibble = 0;
      for (unsigned b = 0; b < 4; ++b)
        if (bit(n * 4 + b)) nibble |= 1U << b;
      if (out.empty() && nibble == 0 && n != 0) continue;
      out.push_back(digits[nibble]);
    }
    return "0x" + out;
  }

  friend bool operator==(const Value&, const Value&) = default;

  // -- arithmetic and logic; operands of binary ops must share a width ----

  static Value add(const Value& a, const Value& b) {
    require_same(a, b, "add");
    Value r = zero(a.width_);
    unsigned __int128 carry = 0;
    for (std::size_t i = 0; i < r.words_.size(); ++i) {
      unsigned __int128 s = static_cast<unsigned __int128>(a.words_[i]) + b.words_[i] + carry;
      r.words_[i] = static_cast<std::uint64_t>(s);
      carry = s >> 64;
    }
    r.mask_top();
    return r;
  }

  static Value neg(const Value& a) { return add(bitwise_not(a), truncate(a.width_, 1)); }

  static Value sub(const Value& a, const Value& b) {
    require_same(a, b, "sub");
    return add(a, neg(b));
  }

  static Value mul(const Value& a, const Value& b) {
    require_same(a, b, "mul");
    const std::size_t n = a.words_.size();
    std::vector<std::uint64_t> acc(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      unsigned __int128 carry = 0;
      for (std::size_t j = 0; i + j < n; ++j) {
        unsigned __int128 cur = static_cast<unsigned __int128>(a.words_[i]) * b.words_[j] +
                                acc[i + j] + carry;
        acc[i + j] = static_cast<std::uint64_t>(cur);
        carry = cur >> 64;
      }
    }
    Value r = zero(a.width_);
    r.words_ = std::move(acc);
    r.mask_top();
    return r;
  }

  static Value bitwise_and(const Value& a, const Value& b) {
    return zip(a, b, "and", [](std::uint64_t x, std::uint64_t y) { return x & y; });
  }
  static Value bitwise_or(const Value& a, const Value& b) {
    return zip(a, b, "or", [](std::uint64_t x, std::uint64_t y) { return x | y; });
  }
  static Value bitwise_xor(const Value& a, const Value& b) {
    return zip(a, b, "xor", [](std::uint64_t x, std::uint64_t y) { return x ^ y; });
  }

  static Value bitwise_not(const Value& a) {
    Value r = a;
    for (auto& w : r.words_) w = ~w;
    r.mask_top();
    return r;
  }

  // Logical shifts; the amount is the full unsigned value of `amount`,
  // and any amount >= width yields zero.
  static Value shl(const Value& a, const Value& amount) {
    require_same(a, amount, "shl");
    const auto k = shift_amount(a, amount);
    if (!k) return zero(a.width_);
    Value r = zero(a.width_);
    for (Width i = *k; i < a.width_; ++i)
      if (a.bit(i - *k)) r.set_bit(i);
    return r;
  }

  static Value shr(const Value& a, const Value& amount) {
    require_same(a, amount, "shr");
    const auto k = shift_amount(a, amount);
    if (!k) return zero(a.width_);
    Value r = zero(a.width_);
    for (Width i = 0; i + *k < a.width_; ++i)
      if (a.bit(i + *k)) r.set_bit(i);
    return r;
  }

  // Three-way unsigned comparison.
  static int compare(const Value& a, const Value& b) {
    require_same(a, b, "compare");
    for (std::size_t i = a.words_.size(); i-- > 0;) {
      if (a.words_[i] < b.words_[i]) return -1;
      if (a.words_[i] > b.words_[i]) return 1;
    }
    return 0;
  }

  static Value from_bool(bool b) { return Value(1, b ? 1 : 0); }

  bool all_ones() const { return *this == ones(width_); }

  bool parity() const {
    unsigned p = 0;
    for (auto w : words_) p ^= static_cast<unsigned>(__builtin_popcountll(w) & 1);
    return p != 0;
  }

  // Concatenation, most-significant part first.
  static Value concat(const std::vector<Value>& parts) {
    Width total = 0;
    for (const auto& p : parts) total += p.width_;
    Value r = zero(total);
    Width pos = 0;
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
      for (Width i = 0; i < it->width_; ++i)
        if (it->bit(i)) r.set_bit(pos + i);
      pos += it->width_;
    }
    return r;
  }

  // Bits [low, low + width).
  static Value extract(const Value& a, Width low, Width width) {
    if (width == 0 || static_cast<std::uint64_t>(low) + width > a.width_)
      throw ContractViolation("extract out of range");
    Value r = zero(width);
    for (Width i = 0; i < width; ++i)
      if (a.bit(low + i)) r.set_bit(i);
    return r;
  }

  static Value zero_extend(const Value& a, Width width) {
    if (width < a.width_) throw ContractViolation("zero_extend narrows");
    Value r = zero(width);
    std::copy(a.words_.begin(), a.words_.end(), r.words_.begin());
    return r;
  }

 private:
  static std::size_t word_count(Width width) { return std::max<std::size_t>(1, (width + 63) / 64); }

  void mask_top() {
    const Width rem = width_ % 64;
    if (rem != 0) words_.back() &= (std::uint64_t{1} << rem) - 1;
  }

  void set_bit(Width i) { words_[i / 64] |= std::uint64_t{1} << (i % 64); }

  static void require_same(const Value& a, const Value& b, const char* what) {
    if (a.width_ != b.width_ || a.width_ == 0)
      throw ContractViolation(std::string(what) + ": operand widths differ (" +
                              std::to_string(a.width_) + " vs " + std::to_string(b.width_) + ")");
  }

  template <class F>
  static Value zip(const Value& a, const Value& b, const char* what, F f) {
    require_same(a, b, what);
    Value r = zero(a.width_);
    for (std::size_t i = 0; i < r.words_.size(); ++i) r.words_[i] = f(a.words_[i], b.words_[i]);
    return r;
  }

  static std::optional<Width> shift_amount(const Value& a, const Value& amount) {
    if (!amount.fits_u64() || amount.words_[0] >= a.width_) return std::nullopt;
    return static_cast<Width>(amount.words_[0]);
  }

  Width width_ = 0;
  std::vector<std::uint64_t> words_;
};

}  // namespace cppl
