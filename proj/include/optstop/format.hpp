#pragma once

#include <charconv>
#include <string>
#include <system_error>

namespace optstop {

inline constexpr int kOutputDigits = 12;

/// Locale-independent shortest general form at 12 significant digits.
inline std::string format_number(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value,
                                    std::chars_format::general, kOutputDigits);
  return std::string(buffer, result.ptr);
}

/// `value` rounded to 12 significant digits.
inline double round_output(double value) {
  const std::string text = format_number(value);
  double rounded = value;
  std::from_chars(text.data(), text.data() + text.size(), rounded);
  return rounded;
}

}  // namespace optstop
