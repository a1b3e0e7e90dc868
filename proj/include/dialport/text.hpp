#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace dialport::text {

/// A lowercased token and the byte range it came from in the source text.
struct Token {
  std::string text;
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// Lowercases and splits on every non-alphanumeric ASCII byte. Bytes >= 0x80
/// are kept inside tokens so UTF-8 words survive intact.
std::vector<Token> tokenize(std::string_view input);

/// Token texts only.
std::vector<std::string> words(std::string_view input);

std::string to_lower(std::string_view input);
std::string to_upper(std::string_view input);
std::string trim(std::string_view input);
std::vector<std::string> split(std::string_view input, char delimiter);
bool iequals(std::string_view a, std::string_view b);
bool starts_with(std::string_view input, std::string_view prefix);

}  // namespace dialport::text
