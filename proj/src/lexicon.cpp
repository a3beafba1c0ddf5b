#include "retriever/lexicon.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace retriever {

std::vector<std::string> word_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (cur.empty()) return;
    const char prev = cur.size() > 1 ? cur[cur.size() - 2] : ' ';
    if (cur.size() > 3 && cur.back() == 's' && prev != 's' && prev != 'i' && prev != 'u') cur.pop_back();
    out.push_back(cur);
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) cur += static_cast<char>(std::tolower(c));
    else flush();
  }
  flush();
  return out;
}

std::vector<std::string> target_tokens(std::string_view instruction) {
  static const std::set<std::string> kStop = {
      "a",    "an",   "and",  "any",    "bring", "can",  "could", "fetch", "find", "for",  "from", "get",
      "give", "grab", "hand", "i",      "in",    "is",   "it",    "look",  "me",   "my",   "need", "next",
      "now",  "of",   "on",   "pick",   "please", "retrieve", "search", "some", "that", "the", "then",
      "this",  "to",   "up",   "want",   "where", "with", "you",   "also",  "too",  "one",  "over", "here"};
  std::vector<std::string> out;
  for (auto& w : word_tokens(instruction))
    if (!kStop.count(w)) out.push_back(std::move(w));
  return out;
}

const std::vector<LexiconCategory>& lexicon() {
  static const std::vector<LexiconCategory> kLexicon = {
      {"Snacks & Drinks", {"chips", "cookies", "soda can", "juice box", "candy bar", "crackers"}},
      {"Toiletries", {"lotion", "shampoo", "toothpaste", "soap", "sunscreen", "deodorant"}},
      {"Office Supplies", {"stapler", "marker", "notebook", "scissors", "glue stick", "eraser"}},
      {"Tools", {"screwdriver", "wrench", "pliers", "hammer", "level"}},
      {"Toys", {"toy car", "rubber duck", "yoyo", "ball", "puzzle"}},
  };
  return kLexicon;
}

int semantic_relevance(const std::vector<std::string>& tags, const std::vector<std::string>& target) {
  int best = 0;
  bool any = false;
  for (const auto& tag : tags) {
    const auto tag_words = word_tokens(tag);
    for (const auto& cat : lexicon()) {
      if (word_tokens(cat.tag) != tag_words) continue;
      any = true;
      std::set<std::string> words(tag_words.begin(), tag_words.end());
      for (const auto& item : cat.items)
        for (auto& w : word_tokens(item)) words.insert(std::move(w));
      if (std::any_of(target.begin(), target.end(), [&](const std::string& t) { return words.count(t) > 0; }))
        best = 1;
    }
  }
  if (best > 0) return 1;
  return any ? -1 : 0;
}

}  // namespace retriever
