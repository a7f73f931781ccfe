// SPDX-License-Identifier: Apache-2.0

#ifndef DPA_TEXT_NORM_HPP
#define DPA_TEXT_NORM_HPP

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace dpa {

// SQuAD-style answer normalization, shared by answer judging and the
// QA metrics so both always agree on what counts as a match:
// lowercase, strip punctuation, drop articles (a/an/the), collapse
// whitespace.

inline std::vector<std::string> normalize_tokens(std::string_view text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (unsigned char c : text) {
    if (std::ispunct(c)) continue;
    cleaned.push_back(static_cast<char>(std::tolower(c)));
  }

  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty() && cur != "a" && cur != "an" && cur != "the") {
      tokens.push_back(cur);
    }
    cur.clear();
  };
  for (unsigned char c : cleaned) {
    if (std::isspace(c)) {
      flush();
    } else {
      cur.push_back(static_cast<char>(c));
    }
  }
  flush();
  return tokens;
}

inline std::string normalize_answer(std::string_view text) {
  std::string out;
  for (const auto& tok : normalize_tokens(text)) {
    if (!out.empty()) out.push_back(' ');
    out += tok;
  }
  return out;
}

}  // namespace dpa

#endif  // DPA_TEXT_NORM_HPP
