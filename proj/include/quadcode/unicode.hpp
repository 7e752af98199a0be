#pragma once

// UTF-8 codepoint handling backed by ICU.

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include <string>
#include <string_view>

namespace quadcode {

inline constexpr char32_t kReplacementChar = 0xFFFD;

// Decodes UTF-8; ill-formed sequences become U+FFFD.
inline std::u32string decode_utf8(std::string_view text) {
  std::u32string out;
  out.reserve(text.size());
  const auto* s = reinterpret_cast<const std::uint8_t*>(text.data());
  const auto length = static_cast<std::int32_t>(text.size());
  std::int32_t i = 0;
  while (i < length) {
    UChar32 c;
    U8_NEXT(s, i, length, c);
    out.push_back(c < 0 ? kReplacementChar : static_cast<char32_t>(c));
  }
  return out;
}

inline void append_utf8(std::string& out, char32_t cp) {
  std::uint8_t buf[U8_MAX_LENGTH];
  std::int32_t n = 0;
  UBool error = false;
  U8_APPEND(buf, n, U8_MAX_LENGTH, static_cast<UChar32>(cp), error);
  if (error) {
    n = 0;
    U8_APPEND_UNSAFE(buf, n, kReplacementChar);
  }
  out.append(reinterpret_cast<const char*>(buf), static_cast<std::size_t>(n));
}

inline std::string encode_utf8(std::u32string_view cps) {
  std::string out;
  out.reserve(cps.size());
  for (char32_t cp : cps) append_utf8(out, cp);
  return out;
}

// Simple (1:1) lowercase mapping, so codepoint counts are preserved.
inline char32_t to_lower(char32_t cp) {
  return static_cast<char32_t>(u_tolower(static_cast<UChar32>(cp)));
}

inline bool is_space(char32_t cp) {
  return u_isUWhiteSpace(static_cast<UChar32>(cp));
}

// Unicode general category P* (Pc, Pd, Ps, Pe, Pi, Pf, Po).
inline bool is_punctuation(char32_t cp) {
  return u_ispunct(static_cast<UChar32>(cp));
}

inline std::u32string lowercase(std::u32string_view cps) {
  std::u32string out(cps);
  for (char32_t& cp : out) cp = to_lower(cp);
  return out;
}

}  // namespace quadcode
