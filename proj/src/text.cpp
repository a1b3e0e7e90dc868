#include "dialport/text.hpp"

#include <algorithm>
#include <cctype>

namespace dialport::text {

namespace {

bool is_word_byte(unsigned char c) { return c >= 0x80 || std::isalnum(c) != 0; }

}  // namespace

std::vector<Token> tokenize(std::string_view input) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < input.size()) {
    if (!is_word_byte(static_cast<unsigned char>(input[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < input.size() && is_word_byte(static_cast<unsigned char>(input[j]))) ++j;
    tokens.push_back({to_lower(input.substr(i, j - i)), i, j});
    i = j;
  }
  return tokens;
}

std::vector<std::string> words(std::string_view input) {
  std::vector<std::string> out;
  for (auto& t : tokenize(input)) out.push_back(std::move(t.text));
  return out;
}

std::string to_lower(std::string_view input) {
  std::string out(input);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string to_upper(std::string_view input) {
  std::string out(input);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

std::string trim(std::string_view input) {
  auto first = input.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  auto last = input.find_last_not_of(" \t\r\n");
  return std::string(input.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view input, char delimiter) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    auto pos = input.find(delimiter, start);
    if (pos == std::string_view::npos) {
      parts.emplace_back(input.substr(start));
      break;
    }
    parts.emplace_back(input.substr(start, pos - start));
    start = pos + 1;
  }
  return parts;
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](unsigned char x, unsigned char y) {
           return std::tolower(x) == std::tolower(y);
         });
}

bool starts_with(std::string_view input, std::string_view prefix) {
  return input.substr(0, prefix.size()) == prefix;
}

}  // namespace dialport::text
