#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace plagdet {

// Malformed input data: bad files, broken invariants, insufficient classes.
// The CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller misuse: dimension mismatches, bad arguments. CLI exit code 2.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Mathematically undefined request, e.g. cosine of a zero-norm vector.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

enum class Label : std::uint8_t { van_gogh, other, plagiarized };
enum class Split : std::uint8_t { train, val, test };
enum class BinaryLabel : std::uint8_t { authentic, plagiarized };

inline constexpr std::array<Label, 3> kAllLabels = {Label::van_gogh, Label::other,
                                                    Label::plagiarized};
inline constexpr std::array<Split, 3> kAllSplits = {Split::train, Split::val, Split::test};

constexpr std::string_view to_string(Label l) {
  switch (l) {
    case Label::van_gogh: return "van_gogh";
    case Label::other: return "other";
    case Label::plagiarized: return "plagiarized";
  }
  return "?";
}

constexpr std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

constexpr std::string_view to_string(BinaryLabel b) {
  return b == BinaryLabel::authentic ? "authentic" : "plagiarized";
}

inline Label parse_label(std::string_view s) {
  for (Label l : kAllLabels)
    if (to_string(l) == s) return l;
  throw ValidationError("unknown label '" + std::string(s) + "'");
}

inline Split parse_split(std::string_view s) {
  for (Split sp : kAllSplits)
    if (to_string(sp) == s) return sp;
  throw ValidationError("unknown split '" + std::string(s) + "'");
}

// van_gogh and other are both authentic works.
constexpr BinaryLabel to_binary(Label l) {
  return l == Label::plagiarized ? BinaryLabel::plagiarized : BinaryLabel::authentic;
}

// Small bitset over the three dataset labels.
class LabelSet {
 public:
  constexpr LabelSet() = default;
  constexpr LabelSet(std::initializer_list<Label> labels) {
    for (Label l : labels) insert(l);
  }

  static constexpr LabelSet all() {
    return {Label::van_gogh, Label::other, Label::plagiarized};
  }

  constexpr void insert(Label l) { bits_ |= bit(l); }
  constexpr void erase(Label l) { bits_ &= static_cast<std::uint8_t>(~bit(l)); }
  constexpr bool contains(Label l) const { return (bits_ & bit(l)) != 0; }
  constexpr bool empty() const { return bits_ == 0; }

  constexpr bool operator==(const LabelSet&) const = default;

 private:
  static constexpr std::uint8_t bit(Label l) {
    return static_cast<std::uint8_t>(1u << static_cast<unsigned>(l));
  }
  std::uint8_t bits_ = 0;
};

}  // namespace plagdet
