#pragma once

// CAMEO event codes and their reduction to the four QuadClass quadrants.

#include <array>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include "quadcode/error.hpp"
#include "quadcode/strings.hpp"

namespace quadcode {

inline constexpr int kNumTopLevelCodes = 20;
inline constexpr int kNumClasses = 4;

// Class index order is also the label index used by the models.
enum class QuadClass : std::uint8_t {
  kVerbalCooperation = 0,
  kMaterialCooperation = 1,
  kVerbalConflict = 2,
  kMaterialConflict = 3,
};

enum class Valence : std::uint8_t { kCooperation, kConflict };
enum class Realm : std::uint8_t { kVerbal, kMaterial };

inline constexpr std::array<QuadClass, kNumClasses> kAllQuadClasses = {
    QuadClass::kVerbalCooperation, QuadClass::kMaterialCooperation,
    QuadClass::kVerbalConflict, QuadClass::kMaterialConflict};

constexpr int class_index(QuadClass q) { return static_cast<int>(q); }

constexpr QuadClass class_from_index(int index) {
  if (index < 0 || index >= kNumClasses) {
    throw std::out_of_range("class index out of range");
  }
  return static_cast<QuadClass>(index);
}

constexpr Valence valence(QuadClass q) {
  return (q == QuadClass::kVerbalCooperation ||
          q == QuadClass::kMaterialCooperation)
             ? Valence::kCooperation
             : Valence::kConflict;
}

constexpr Realm realm(QuadClass q) {
  return (q == QuadClass::kVerbalCooperation ||
          q == QuadClass::kVerbalConflict)
             ? Realm::kVerbal
             : Realm::kMaterial;
}

// snake_case names used in every file format.
constexpr std::string_view to_string(QuadClass q) {
  switch (q) {
    case QuadClass::kVerbalCooperation:
      return "verbal_cooperation";
    case QuadClass::kMaterialCooperation:
      return "material_cooperation";
    case QuadClass::kVerbalConflict:
      return "verbal_conflict";
    case QuadClass::kMaterialConflict:
      return "material_conflict";
  }
  return "?";
}

// Human-readable names for reports.
constexpr std::string_view display_name(QuadClass q) {
  switch (q) {
    case QuadClass::kVerbalCooperation:
      return "Verbal Cooperation";
    case QuadClass::kMaterialCooperation:
      return "Material Cooperation";
    case QuadClass::kVerbalConflict:
      return "Verbal Conflict";
    case QuadClass::kMaterialConflict:
      return "Material Conflict";
  }
  return "?";
}

inline std::optional<QuadClass> parse_quad_class(std::string_view name) {
  for (QuadClass q : kAllQuadClasses) {
    if (to_string(q) == name) return q;
  }
  return std::nullopt;
}

enum class CameoErrorKind { kNonNumeric, kBadLength, kTopLevelOutOfRange };
using CameoError = KindedError<CameoErrorKind>;

// A CAMEO event code of 2-4 digits. Stored as text so leading zeros survive.
class CameoCode {
 public:
  // Strips surrounding whitespace and validates.
  static CameoCode parse(std::string_view text) {
    const std::string_view digits = trim(text);
    const std::string quoted = "\"" + std::string(text) + "\"";
    for (char c : digits) {
      if (c < '0' || c > '9') {
        throw CameoError(CameoErrorKind::kNonNumeric,
                         "CAMEO code " + quoted + " contains a non-digit");
      }
    }
    if (digits.size() < 2 || digits.size() > 4) {
      throw CameoError(CameoErrorKind::kBadLength,
                       "CAMEO code " + quoted + " must have 2 to 4 digits");
    }
    const int top = (digits[0] - '0') * 10 + (digits[1] - '0');
    if (top < 1 || top > kNumTopLevelCodes) {
      throw CameoError(CameoErrorKind::kTopLevelOutOfRange,
                       "CAMEO code " + quoted +
                           " has top-level category outside 01-20");
    }
    return CameoCode(std::string(digits));
  }

  const std::string& digits() const noexcept { return digits_; }

  // Integer value of the two-digit prefix, in [1, 20].
  int top_level() const noexcept {
    return (digits_[0] - '0') * 10 + (digits_[1] - '0');
  }

  friend bool operator==(const CameoCode&, const CameoCode&) = default;
  friend auto operator<=>(const CameoCode&, const CameoCode&) = default;

 private:
  explicit CameoCode(std::string digits) : digits_(std::move(digits)) {}

  std::string digits_;
};

inline int top_level(const CameoCode& code) { return code.top_level(); }

enum class QuadMapErrorKind { kMissingTopLevel, kDuplicateTopLevel, kParseError };
using QuadMapError = KindedError<QuadMapErrorKind>;

// Total mapping from top-level CAMEO category (1-20) to QuadClass.
class QuadClassMap {
 public:
  // 01-05 verbal cooperation, 06-08 material cooperation, 09-13 verbal
  // conflict, 14-20 material conflict.
  static QuadClassMap default_map() {
    std::array<QuadClass, kNumTopLevelCodes> table{};
    for (int top = 1; top <= kNumTopLevelCodes; ++top) {
      QuadClass q = QuadClass::kMaterialConflict;
      if (top <= 5) {
        q = QuadClass::kVerbalCooperation;
      } else if (top <= 8) {
        q = QuadClass::kMaterialCooperation;
      } else if (top <= 13) {
        q = QuadClass::kVerbalConflict;
      }
      table[top - 1] = q;
    }
    return QuadClassMap(table);
  }

  // Parses the `<range|code> <class>` text format. Every top-level code must
  // be covered exactly once.
  static QuadClassMap parse(std::string_view text) {
    std::array<std::optional<QuadClass>, kNumTopLevelCodes> table{};
    int line_no = 0;
    for (std::string_view line : split_lines(text)) {
      ++line_no;
      if (auto hash = line.find('#'); hash != std::string_view::npos) {
        line = line.substr(0, hash);
      }
      const auto fields = split_whitespace(line);
      if (fields.empty()) continue;
      auto parse_error = [&](const std::string& why) {
        return QuadMapError(QuadMapErrorKind::kParseError,
                            "quad map line " + std::to_string(line_no) +
                                ": " + why);
      };
      if (fields.size() != 2) throw parse_error("expected `<range> <class>`");
      const auto q = parse_quad_class(fields[1]);
      if (!q) throw parse_error("unknown class \"" + std::string(fields[1]) + "\"");

      std::string_view range = fields[0];
      std::string_view lo_text = range, hi_text = range;
      if (auto dash = range.find('-'); dash != std::string_view::npos) {
        lo_text = range.substr(0, dash);
        hi_text = range.substr(dash + 1);
      }
      const auto lo = parse_top_level_number(lo_text);
      const auto hi = parse_top_level_number(hi_text);
      if (!lo || !hi || *lo > *hi) {
        throw parse_error("bad code range \"" + std::string(range) + "\"");
      }
      for (int top = *lo; top <= *hi; ++top) {
        if (table[top - 1]) {
          throw QuadMapError(QuadMapErrorKind::kDuplicateTopLevel,
                             "quad map assigns top-level code " +
                                 std::to_string(top) + " more than once");
        }
        table[top - 1] = *q;
      }
    }
    std::array<QuadClass, kNumTopLevelCodes> total{};
    for (int top = 1; top <= kNumTopLevelCodes; ++top) {
      if (!table[top - 1]) {
        throw QuadMapError(QuadMapErrorKind::kMissingTopLevel,
                           "quad map has no entry for top-level code " +
                               std::to_string(top));
      }
      total[top - 1] = *table[top - 1];
    }
    return QuadClassMap(total);
  }

  static QuadClassMap load(const std::string& path) {
    return parse(read_file(path));
  }

  // Canonical text form: runs of equal classes collapsed into ranges.
  std::string serialize() const {
    std::ostringstream out;
    out << "# CAMEO top-level code range -> QuadClass\n";
    int start = 1;
    for (int top = 2; top <= kNumTopLevelCodes + 1; ++top) {
      if (top <= kNumTopLevelCodes && table_[top - 1] == table_[start - 1]) {
        continue;
      }
      out << two_digits(start);
      if (top - 1 != start) out << '-' << two_digits(top - 1);
      out << ' ' << to_string(table_[start - 1]) << '\n';
      start = top;
    }
    return out.str();
  }

  void write(const std::string& path) const { write_file(path, serialize()); }

  QuadClass operator[](int top_level) const {
    if (top_level < 1 || top_level > kNumTopLevelCodes) {
      throw std::out_of_range("top-level code out of range");
    }
    return table_[top_level - 1];
  }

  QuadClass quad_of(const CameoCode& code) const {
    return table_[code.top_level() - 1];
  }

  friend bool operator==(const QuadClassMap&, const QuadClassMap&) = default;

 private:
  explicit QuadClassMap(const std::array<QuadClass, kNumTopLevelCodes>& table)
      : table_(table) {}

  static std::optional<int> parse_top_level_number(std::string_view s) {
    if (s.empty() || s.size() > 2) return std::nullopt;
    int value = 0;
    for (char c : s) {
      if (c < '0' || c > '9') return std::nullopt;
      value = value * 10 + (c - '0');
    }
    if (value < 1 || value > kNumTopLevelCodes) return std::nullopt;
    return value;
  }

  static std::string two_digits(int n) {
    return (n < 10 ? "0" : "") + std::to_string(n);
  }

  std::array<QuadClass, kNumTopLevelCodes> table_;
};

inline QuadClass quad_of(const CameoCode& code, const QuadClassMap& map) {
  return map.quad_of(code);
}

inline QuadClassMap load_quad_map(const std::string& path) {
  return QuadClassMap::load(path);
}

}  // namespace quadcode
