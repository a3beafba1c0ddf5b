#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace retriever {

/// Lowercase alphanumeric words, with a naive plural strip ("cookies" -> "cookie").
std::vector<std::string> word_tokens(std::string_view text);

/// Words of an instruction that name the wanted object.
std::vector<std::string> target_tokens(std::string_view instruction);

struct LexiconCategory {
  std::string tag;                 // as printed on drawer labels
  std::vector<std::string> items;  // object labels that belong there
};

const std::vector<LexiconCategory>& lexicon();

/// +1 when one of `tags` names a category holding the target, -1 when the
/// tags name only other categories, 0 when none of them is a category.
int semantic_relevance(const std::vector<std::string>& tags, const std::vector<std::string>& target);

}  // namespace retriever
