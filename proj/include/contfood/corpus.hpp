#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace contfood {

enum class Label : int { NonVeg = 0, Veg = 1 };

constexpr int to_int(Label l) { return static_cast<int>(l); }
constexpr Label label_from_int(int v) { return v != 0 ? Label::Veg : Label::NonVeg; }
std::string_view label_token(Label l);
/// "veg" / "nonveg" (case-insensitive, trimmed); nullopt for anything else.
std::optional<Label> parse_label_token(std::string_view token);

struct DishRecord {
  std::string item_name;
  std::optional<Label> label;
  std::vector<std::string> ingredients;

  bool operator==(const DishRecord&) const = default;
};

/// Cue terms for the keyword labeler. Non-veg terms take precedence.
struct KeywordRules {
  std::set<std::string> veg_terms;
  std::set<std::string> nonveg_terms;

  /// Throws DataError when the sets overlap, are empty, or hold a term that is
  /// not a single token under the shared tokenizer.
  void validate() const;

  static KeywordRules from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  static KeywordRules load(const std::string& path);

  /// The four veg and four non-veg cue words from the original heuristic plus
  /// an extended list; mirrors data/rules/default.json.
  static KeywordRules defaults();
};

struct Corpus {
  std::vector<DishRecord> records;
  std::string source;

  std::size_t size() const { return records.size(); }
  bool operator==(const Corpus&) const = default;
};

enum class CorpusFormat { csv, jsonl };

/// Format from the file extension (.jsonl/.json -> jsonl, otherwise csv).
CorpusFormat format_for_path(std::string_view path);

Corpus parse_csv(std::string_view text, std::string source = "<memory>");
Corpus parse_jsonl(std::string_view text, std::string source = "<memory>");
Corpus ingest(const std::string& path, CorpusFormat format);
Corpus ingest(const std::string& path);

void write_csv(const Corpus& corpus, std::ostream& out);
void write_jsonl(const Corpus& corpus, std::ostream& out);
void save_corpus(const Corpus& corpus, const std::string& path);

struct AutolabelCounts {
  std::size_t veg = 0;
  std::size_t nonveg = 0;
  std::size_t unmatched = 0;
};

/// Rule-based label for one name, nullopt when no cue term appears.
std::optional<Label> keyword_label(std::string_view item_name, const KeywordRules& rules);

/// Labels every unlabeled record whose name contains a cue token. Counts are
/// over the whole output corpus.
std::pair<Corpus, AutolabelCounts> autolabel(const Corpus& corpus, const KeywordRules& rules);

/// Case-folded, whitespace-collapsed, trimmed form of a name.
std::string normalize_name(std::string_view name);

/// Drops records whose normalized name already occurred earlier.
Corpus dedupe(const Corpus& corpus);

struct CorpusSplit {
  Corpus train;
  Corpus test;
};

/// Seeded unstratified shuffle; |train| = floor(ratio * n).
CorpusSplit split(const Corpus& corpus, double ratio, std::uint64_t seed);

/// Knobs for the synthetic dish-name generator.
struct SyntheticProfile {
  /// Fraction of Veg records; the default makes Veg the 45% minority.
  double veg_fraction = 0.45;
  /// Generated pseudo-word modifiers mixed into names. With the default pool
  /// a 25k-record corpus has more distinct terms than the 5000-term cap.
  std::size_t filler_pool = 6000;
  /// Probability that the modifier comes from the pseudo-word pool rather
  /// than the fixed cooking-style list.
  double pool_modifier_rate = 0.5;
  /// Emit a short ingredient list (cue term plus filler) per record.
  bool with_ingredients = false;
  /// Leave labels absent in the output.
  bool unlabeled = false;

  static SyntheticProfile from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Dish names of the form "<modifier> <cue-term> <dish-form>", every one
/// labelable by `rules`; class counts are exact: round(veg_fraction * n) Veg.
Corpus generate_synthetic(std::size_t n, std::uint64_t seed, const KeywordRules& rules,
                          const SyntheticProfile& profile = {});

}  // namespace contfood
