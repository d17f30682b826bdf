#include "contfood/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "contfood/codec.hpp"
#include "contfood/error.hpp"
#include "contfood/rng.hpp"
#include "contfood/vectorizer.hpp"

namespace contfood {

namespace {

std::string trim(std::string_view s) {
  const auto ws = [](unsigned char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  std::size_t b = 0, e = s.size();
  while (b < e && ws(s[b])) ++b;
  while (e > b && ws(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::vector<std::string> split_ingredients(std::string_view field) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= field.size()) {
    const auto end = std::min(field.find(';', start), field.size());
    if (auto item = trim(field.substr(start, end - start)); !item.empty()) out.push_back(std::move(item));
    start = end + 1;
  }
  return out;
}

DishRecord make_record(const std::string& name, const std::string& type, std::vector<std::string> ingredients,
                       const std::string& where) {
  DishRecord r;
  r.item_name = trim(name);
  if (r.item_name.empty()) throw DataError(where + ": empty item_name");
  const auto t = trim(type);
  if (!t.empty()) {
    r.label = parse_label_token(t);
    if (!r.label) throw DataError(where + ": unknown type token '" + t + "' (expected veg, nonveg or empty)");
  }
  r.ingredients = std::move(ingredients);
  return r;
}

// One RFC-4180 record starting at `pos`; advances pos and the line counter.
std::vector<std::string> read_csv_record(std::string_view text, std::size_t& pos, std::size_t& line) {
  std::vector<std::string> fields;
  std::string field;
  const std::size_t start_line = line;
  bool quoted = false;
  bool after_quote = false;
  for (;;) {
    if (pos >= text.size()) {
      if (quoted) throw DataError("line " + std::to_string(start_line) + ": unterminated quoted field");
      fields.push_back(std::move(field));
      return fields;
    }
    const char c = text[pos++];
    if (quoted) {
      if (c == '"') {
        if (pos < text.size() && text[pos] == '"') {
          field += '"';
          ++pos;
        } else {
          quoted = false;
          after_quote = true;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      after_quote = false;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && pos < text.size() && text[pos] == '\n') ++pos;
      ++line;
      fields.push_back(std::move(field));
      return fields;
    } else if (c == '"') {
      if (!field.empty() || after_quote) {
        throw DataError("line " + std::to_string(start_line) + ": stray quote inside unquoted field");
      }
      quoted = true;
    } else {
      if (after_quote) throw DataError("line " + std::to_string(start_line) + ": data after closing quote");
      field += c;
    }
  }
}

std::string csv_quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string join_ingredients(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ';';
    out += items[i];
  }
  return out;
}

}  // namespace

std::string_view label_token(Label l) { return l == Label::Veg ? "veg" : "nonveg"; }

std::optional<Label> parse_label_token(std::string_view token) {
  const auto t = lower_ascii(trim(token));
  if (t == "veg") return Label::Veg;
  if (t == "nonveg") return Label::NonVeg;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Rules

void KeywordRules::validate() const {
  if (veg_terms.empty() || nonveg_terms.empty()) throw DataError("rules: both term lists must be non-empty");
  for (const auto* set : {&veg_terms, &nonveg_terms}) {
    for (const auto& term : *set) {
      const auto toks = tokenize(term);
      if (toks.size() != 1 || toks.front() != term) {
        throw DataError("rules: term '" + term + "' is not a single lowercase token");
      }
      if (set == &veg_terms && nonveg_terms.count(term)) {
        throw DataError("rules: term '" + term + "' appears in both veg_terms and nonveg_terms");
      }
    }
  }
}

KeywordRules KeywordRules::from_json(const nlohmann::json& j) {
  KeywordRules r;
  try {
    for (const auto& t : j.at("veg_terms")) r.veg_terms.insert(t.get<std::string>());
    for (const auto& t : j.at("nonveg_terms")) r.nonveg_terms.insert(t.get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("rules: ") + e.what());
  }
  r.validate();
  return r;
}

nlohmann::json KeywordRules::to_json() const {
  return {{"veg_terms", std::vector<std::string>(veg_terms.begin(), veg_terms.end())},
          {"nonveg_terms", std::vector<std::string>(nonveg_terms.begin(), nonveg_terms.end())}};
}

KeywordRules KeywordRules::load(const std::string& path) {
  try {
    return from_json(nlohmann::json::parse(codec::read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("rules file " + path + ": " + e.what());
  }
}

KeywordRules KeywordRules::defaults() {
  KeywordRules r;
  r.veg_terms = {"salad",    "vegetable", "tofu",    "lentil",      "paneer",  "dal",   "chana",  "rajma",
                 "aloo",     "gobi",      "palak",   "mushroom",    "spinach", "chickpea", "bean", "potato",
                 "okra",     "bhindi",    "brinjal", "cauliflower", "pumpkin", "idli",  "dosa",   "sambar",
                 "khichdi",  "veggie",    "vegetarian", "vegan",    "falafel", "hummus"};
  r.nonveg_terms = {"chicken", "beef",  "pork",  "fish",    "mutton", "lamb",     "goat",    "prawn",
                    "shrimp",  "crab",  "lobster", "egg",   "keema",  "bacon",    "ham",     "sausage",
                    "turkey",  "duck",  "salmon", "tuna",   "squid",  "octopus",  "meat",    "meatball",
                    "anchovy", "oyster", "mussel", "clam",  "venison", "chorizo"};
  return r;
}

// ---------------------------------------------------------------------------
// Ingestion

CorpusFormat format_for_path(std::string_view path) {
  if (path.ends_with(".jsonl") || path.ends_with(".json")) return CorpusFormat::jsonl;
  return CorpusFormat::csv;
}

Corpus parse_csv(std::string_view text, std::string source) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  if (trim(text).empty()) throw DataError(source + ": empty file");
  std::size_t pos = 0, line = 1;
  const auto header = read_csv_record(text, pos, line);
  if (header.size() != 3 || trim(header[0]) != "item_name" || trim(header[1]) != "type" ||
      trim(header[2]) != "ingredients") {
    throw DataError(source + ": line 1: expected header 'item_name,type,ingredients'");
  }
  Corpus corpus;
  corpus.source = std::move(source);
  while (pos < text.size()) {
    const std::size_t row_line = line;
    auto fields = read_csv_record(text, pos, line);
    if (fields.size() == 1 && trim(fields[0]).empty()) continue;  // blank line
    const std::string where = corpus.source + ": line " + std::to_string(row_line);
    if (fields.size() != 3) {
      throw DataError(where + ": expected 3 fields, found " + std::to_string(fields.size()));
    }
    corpus.records.push_back(make_record(fields[0], fields[1], split_ingredients(fields[2]), where));
  }
  if (corpus.records.empty()) throw DataError(corpus.source + ": no data rows");
  return corpus;
}

Corpus parse_jsonl(std::string_view text, std::string source) {
  Corpus corpus;
  corpus.source = std::move(source);
  std::size_t line_no = 0, start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = trim(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (line.empty()) continue;
    const std::string where = corpus.source + ": line " + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(where + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("item_name") || !j["item_name"].is_string()) {
      throw DataError(where + ": expected an object with a string item_name");
    }
    std::string type;
    if (j.contains("type") && !j["type"].is_null()) {
      if (!j["type"].is_string()) throw DataError(where + ": type must be a string or null");
      type = j["type"].get<std::string>();
    }
    std::vector<std::string> ingredients;
    if (j.contains("ingredients") && !j["ingredients"].is_null()) {
      if (!j["ingredients"].is_array()) throw DataError(where + ": ingredients must be an array");
      for (const auto& item : j["ingredients"]) {
        if (!item.is_string()) throw DataError(where + ": ingredients must be strings");
        ingredients.push_back(item.get<std::string>());
      }
    }
    corpus.records.push_back(make_record(j["item_name"].get<std::string>(), type, std::move(ingredients), where));
  }
  if (corpus.records.empty()) throw DataError(corpus.source + ": empty file");
  return corpus;
}

Corpus ingest(const std::string& path, CorpusFormat format) {
  const auto text = codec::read_file(path);
  return format == CorpusFormat::csv ? parse_csv(text, path) : parse_jsonl(text, path);
}

Corpus ingest(const std::string& path) { return ingest(path, format_for_path(path)); }

void write_csv(const Corpus& corpus, std::ostream& out) {
  out << "item_name,type,ingredients\n";
  for (const auto& r : corpus.records) {
    out << csv_quote(r.item_name) << ',' << (r.label ? label_token(*r.label) : "") << ','
        << csv_quote(join_ingredients(r.ingredients)) << '\n';
  }
}

void write_jsonl(const Corpus& corpus, std::ostream& out) {
  for (const auto& r : corpus.records) {
    nlohmann::json j;
    j["item_name"] = r.item_name;
    j["type"] = r.label ? nlohmann::json(std::string(label_token(*r.label))) : nlohmann::json(nullptr);
    j["ingredients"] = r.ingredients;
    out << j.dump() << '\n';
  }
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ostringstream ss;
  if (format_for_path(path) == CorpusFormat::jsonl) {
    write_jsonl(corpus, ss);
  } else {
    write_csv(corpus, ss);
  }
  codec::write_file_atomic(path, ss.str());
}

// ---------------------------------------------------------------------------
// Labeling, dedupe, split

std::optional<Label> keyword_label(std::string_view item_name, const KeywordRules& rules) {
  bool veg = false;
  for (const auto& tok : tokenize(item_name)) {
    if (rules.nonveg_terms.count(tok)) return Label::NonVeg;
    if (rules.veg_terms.count(tok)) veg = true;
  }
  return veg ? std::optional<Label>(Label::Veg) : std::nullopt;
}

std::pair<Corpus, AutolabelCounts> autolabel(const Corpus& corpus, const KeywordRules& rules) {
  rules.validate();
  Corpus out = corpus;
  AutolabelCounts counts;
  for (auto& r : out.records) {
    if (!r.label) r.label = keyword_label(r.item_name, rules);
    if (!r.label) {
      ++counts.unmatched;
    } else if (*r.label == Label::Veg) {
      ++counts.veg;
    } else {
      ++counts.nonveg;
    }
  }
  return {std::move(out), counts};
}

std::string normalize_name(std::string_view name) {
  std::string out;
  bool pending_space = false;
  for (char c : name) {
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
  }
  return out;
}

Corpus dedupe(const Corpus& corpus) {
  Corpus out;
  out.source = corpus.source;
  std::unordered_set<std::string> seen;
  for (const auto& r : corpus.records) {
    if (seen.insert(normalize_name(r.item_name)).second) out.records.push_back(r);
  }
  return out;
}

CorpusSplit split(const Corpus& corpus, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw UsageError("split: ratio must lie in (0, 1)");
  std::string unlabeled;
  std::size_t n_unlabeled = 0;
  for (const auto& r : corpus.records) {
    if (!r.label) {
      if (n_unlabeled < 20) unlabeled += (n_unlabeled ? ", " : "") + r.item_name;
      ++n_unlabeled;
    }
  }
  if (n_unlabeled) {
    throw DataError("split: " + std::to_string(n_unlabeled) + " unlabeled record(s): " + unlabeled +
                    (n_unlabeled > 20 ? ", ..." : ""));
  }
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, "split"));
  rng.shuffle(std::span(order));
  // The epsilon absorbs binary representation error, e.g. 0.29 * 100.
  const auto n_train = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(corpus.size()) + 1e-9));
  CorpusSplit s;
  s.train.source = corpus.source + "#train";
  s.test.source = corpus.source + "#test";
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? s.train : s.test).records.push_back(corpus.records[order[i]]);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Synthetic generator

namespace {

const std::vector<std::string>& style_modifiers() {
  static const std::vector<std::string> v = {
      "spicy",  "grilled", "crispy",   "roasted",  "tandoori", "smoky",   "creamy",   "tangy",
      "steamed", "baked",  "fried",    "stuffed",  "masala",   "lemon",   "ginger",   "pepper",
      "coconut", "classic", "homestyle", "street", "royal",    "kerala",  "punjabi",  "goan",
      "bengali", "hyderabadi", "chettinad", "mughlai", "kashmiri", "rustic", "golden", "sizzling",
      "honey",  "herb",    "chili",    "mint",     "garlic",   "butter",  "tamarind", "saffron"};
  return v;
}

const std::vector<std::string>& dish_forms() {
  static const std::vector<std::string> v = {
      "curry",   "stew",    "tikka",    "biryani",  "pulao",    "soup",    "wrap",    "roll",
      "sandwich", "burger", "pizza",    "pasta",    "noodles",  "korma",   "vindaloo", "kebab",
      "skewers", "platter", "bowl",     "pie",      "tacos",    "fritters", "cutlet", "patty",
      "momos",   "dumplings", "rice",   "sizzler",  "chaat",    "thali",   "gravy",   "bake",
      "tart",    "risotto", "casserole", "frankie", "kathi",    "bhaji",   "pakora",  "handi"};
  return v;
}

const std::vector<std::string>& ingredient_fillers() {
  static const std::vector<std::string> v = {"onion", "tomato", "cumin", "coriander", "turmeric",
                                             "salt",  "oil",    "cream", "yogurt",    "cardamom"};
  return v;
}

// Pronounceable pseudo-words; fixed seed so the pool is identical across corpora.
std::vector<std::string> pseudo_word_pool(std::size_t n, const std::unordered_set<std::string>& reserved) {
  static constexpr std::string_view kConsonants = "bdfgklmnprstvz";
  static constexpr std::string_view kVowels = "aeiou";
  std::vector<std::string> pool;
  pool.reserve(n);
  std::unordered_set<std::string> seen;
  Rng rng(derive_seed(0x5eed, "pseudo-words"));
  while (pool.size() < n) {
    const std::size_t syllables = 2 + rng.below(2);
    std::string w;
    for (std::size_t s = 0; s < syllables; ++s) {
      w += kConsonants[rng.below(kConsonants.size())];
      w += kVowels[rng.below(kVowels.size())];
    }
    if (reserved.count(w) || is_stop_word(w) || !seen.insert(w).second) continue;
    pool.push_back(std::move(w));
  }
  return pool;
}

std::string title_case(std::string w) {
  if (!w.empty() && w[0] >= 'a' && w[0] <= 'z') w[0] = static_cast<char>(w[0] - 'a' + 'A');
  return w;
}

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& v) {
  return v[rng.below(v.size())];
}

}  // namespace

SyntheticProfile SyntheticProfile::from_json(const nlohmann::json& j) {
  SyntheticProfile p;
  p.veg_fraction = j.value("veg_fraction", p.veg_fraction);
  p.filler_pool = j.value("filler_pool", p.filler_pool);
  p.pool_modifier_rate = j.value("pool_modifier_rate", p.pool_modifier_rate);
  p.with_ingredients = j.value("with_ingredients", p.with_ingredients);
  p.unlabeled = j.value("unlabeled", p.unlabeled);
  return p;
}

nlohmann::json SyntheticProfile::to_json() const {
  return {{"veg_fraction", veg_fraction},
          {"filler_pool", filler_pool},
          {"pool_modifier_rate", pool_modifier_rate},
          {"with_ingredients", with_ingredients},
          {"unlabeled", unlabeled}};
}

Corpus generate_synthetic(std::size_t n, std::uint64_t seed, const KeywordRules& rules,
                          const SyntheticProfile& profile) {
  if (n < 2) throw UsageError("generate_synthetic: n must be at least 2");
  if (!(profile.veg_fraction >= 0.0 && profile.veg_fraction <= 1.0)) {
    throw UsageError("generate_synthetic: veg_fraction must lie in [0, 1]");
  }
  rules.validate();

  std::unordered_set<std::string> reserved(rules.veg_terms.begin(), rules.veg_terms.end());
  reserved.insert(rules.nonveg_terms.begin(), rules.nonveg_terms.end());
  auto filtered = [&](const std::vector<std::string>& words) {
    std::vector<std::string> out;
    for (const auto& w : words) {
      if (!reserved.count(w)) out.push_back(w);
    }
    return out;
  };
  const auto modifiers = filtered(style_modifiers());
  const auto forms = filtered(dish_forms());
  const auto fillers = filtered(ingredient_fillers());
  for (const auto& w : style_modifiers()) reserved.insert(w);
  for (const auto& w : dish_forms()) reserved.insert(w);
  for (const auto& w : ingredient_fillers()) reserved.insert(w);
  const auto pool = pseudo_word_pool(profile.filler_pool, reserved);
  if (pool.empty() && modifiers.empty()) {
    throw UsageError("generate_synthetic: the rules reserve every modifier and the filler pool is empty");
  }

  const std::vector<std::string> veg(rules.veg_terms.begin(), rules.veg_terms.end());
  const std::vector<std::string> nonveg(rules.nonveg_terms.begin(), rules.nonveg_terms.end());

  const auto n_veg = static_cast<std::size_t>(std::llround(profile.veg_fraction * static_cast<double>(n)));
  std::vector<Label> labels(n, Label::NonVeg);
  std::fill_n(labels.begin(), n_veg, Label::Veg);
  Rng rng(derive_seed(seed, "synthetic"));
  rng.shuffle(std::span(labels));

  Corpus corpus;
  corpus.source = "synthetic:n=" + std::to_string(n) + ":seed=" + std::to_string(seed);
  corpus.records.reserve(n);
  for (Label label : labels) {
    const auto& cue = pick(rng, label == Label::Veg ? veg : nonveg);
    const bool from_pool = !pool.empty() && (modifiers.empty() || rng.uniform01() < profile.pool_modifier_rate);
    const auto& modifier = from_pool ? pick(rng, pool) : pick(rng, modifiers);
    DishRecord r;
    r.item_name = title_case(modifier) + " " + title_case(cue);
    // Rule files may reserve every dish form; names then end at the cue.
    if (!forms.empty()) r.item_name += " " + title_case(pick(rng, forms));
    if (!profile.unlabeled) r.label = label;
    if (profile.with_ingredients) {
      r.ingredients = {cue};
      if (!fillers.empty()) {
        r.ingredients.push_back(pick(rng, fillers));
        r.ingredients.push_back(pick(rng, fillers));
      }
    }
    corpus.records.push_back(std::move(r));
  }
  return corpus;
}

}  // namespace contfood
