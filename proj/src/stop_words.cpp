#include <algorithm>
#include <string>
#include <string_view>
#include <vector>

#include "contfood/codec.hpp"
#include "contfood/vectorizer.hpp"

namespace contfood {

namespace {

// Function words only; no food vocabulary. Sorted for binary search.
constexpr std::string_view kStopWords[] = {
    "about", "above", "after", "again", "against", "all", "also", "am", "an", "and",
    "any", "are", "as", "at", "be", "because", "been", "before", "being", "below",
    "between", "both", "but", "by", "can", "could", "did", "do", "does", "doing",
    "down", "during", "each", "few", "for", "from", "further", "had", "has", "have",
    "having", "he", "her", "here", "hers", "herself", "him", "himself", "his", "how",
    "if", "in", "into", "is", "it", "its", "itself", "just", "me", "more",
    "most", "my", "myself", "no", "nor", "not", "now", "of", "off", "on",
    "once", "only", "or", "other", "our", "ours", "ourselves", "out", "over", "own",
    "same", "she", "should", "so", "some", "such", "than", "that", "the", "their",
    "theirs", "them", "themselves", "then", "there", "these", "they", "this", "those", "through",
    "to", "too", "under", "until", "up", "very", "was", "we", "were", "what",
    "when", "where", "which", "while", "who", "whom", "why", "will", "with", "would",
    "you", "your", "yours", "yourself", "yourselves",
};

}  // namespace

const std::vector<std::string_view>& stop_words() {
  static const std::vector<std::string_view> words(std::begin(kStopWords), std::end(kStopWords));
  return words;
}

bool is_stop_word(std::string_view token) {
  return std::binary_search(std::begin(kStopWords), std::end(kStopWords), token);
}

const std::string& stop_list_id() {
  static const std::string id = [] {
    std::string joined;
    for (auto w : kStopWords) {
      joined += w;
      joined += '\n';
    }
    char buf[16];
    std::snprintf(buf, sizeof buf, "%08x", codec::crc32(joined));
    return std::string("en-function-words-v1:") + buf;
  }();
  return id;
}

}  // namespace contfood
