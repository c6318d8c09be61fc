#include "synthetic_corpus.hpp"

#include <array>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

#include "crnmt/random.hpp"

namespace crnmt::testing {
namespace {

enum Gender { kMasc, kFem, kNeut };

constexpr std::size_t kNounCount = 400;
constexpr std::size_t kAdjectiveCount = 60;
constexpr std::size_t kVerbCount = 120;

struct Noun {
  const char* de;
  Gender gender;
  const char* en;
};

struct Adjective {
  const char* de;
  const char* en;
};

struct Verb {
  const char* de_ich;
  const char* de_du;
  const char* de_er;
  const char* de_wir;
  const char* en_base;
  const char* en_third;
};

struct Pronoun {
  const char* de;
  const char* en;
  int person;  // 1 ich, 2 du, 3 er/sie, 4 wir
};

const Noun kBaseNouns[] = {
    {"hund", kMasc, "dog"},       {"mann", kMasc, "man"},        {"lehrer", kMasc, "teacher"},
    {"apfel", kMasc, "apple"},    {"tisch", kMasc, "table"},     {"brief", kMasc, "letter"},
    {"vogel", kMasc, "bird"},     {"arzt", kMasc, "doctor"},     {"katze", kFem, "cat"},
    {"frau", kFem, "woman"},      {"blume", kFem, "flower"},     {"zeitung", kFem, "newspaper"},
    {"lampe", kFem, "lamp"},      {"tasche", kFem, "bag"},       {"kind", kNeut, "child"},
    {"buch", kNeut, "book"},      {"haus", kNeut, "house"},      {"auto", kNeut, "car"},
    {"bild", kNeut, "picture"},   {"fenster", kNeut, "window"},  {"pferd", kNeut, "horse"},
    {"mädchen", kNeut, "girl"},
};

const Adjective kBaseAdjectives[] = {
    {"groß", "big"},  {"klein", "small"}, {"alt", "old"},  {"neu", "new"},
    {"rot", "red"},   {"schön", "nice"},  {"jung", "young"}, {"blau", "blue"},
};

const Verb kBaseVerbs[] = {
    {"sehe", "siehst", "sieht", "sehen", "see", "sees"},
    {"finde", "findest", "findet", "finden", "find", "finds"},
    {"suche", "suchst", "sucht", "suchen", "look for", "looks for"},
    {"kaufe", "kaufst", "kauft", "kaufen", "buy", "buys"},
    {"brauche", "brauchst", "braucht", "brauchen", "need", "needs"},
    {"male", "malst", "malt", "malen", "paint", "paints"},
    {"trage", "trägst", "trägt", "tragen", "carry", "carries"},
    {"mag", "magst", "mag", "mögen", "like", "likes"},
    {"kenne", "kennst", "kennt", "kennen", "know", "knows"},
    {"hole", "holst", "holt", "holen", "fetch", "fetches"},
};

const Pronoun kPronouns[] = {
    {"ich", "i", 1}, {"du", "you", 2}, {"er", "he", 3}, {"sie", "she", 3}, {"wir", "we", 4},
};

const std::pair<const char*, const char*> kTimes[] = {
    {"heute", "today"}, {"morgen", "tomorrow"}, {"jetzt", "now"}, {"oft", "often"}, {"immer", "always"},
};

const std::pair<const char*, const char*> kConjunctions[] = {
    {"weil", "because"}, {"wenn", "when"}, {"obwohl", "although"}, {"dass", "that"},
};

// Pseudo-words extend the lexicon so that rare and unseen words occur.
std::string pseudo_word(Rng& rng, const char* const* onsets, std::size_t n_onsets, const char* const* nuclei,
                        std::size_t n_nuclei, const char* const* codas, std::size_t n_codas) {
  std::string w;
  const std::size_t syllables = 2 + rng.below(2);
  for (std::size_t i = 0; i < syllables; ++i) {
    w += onsets[rng.below(n_onsets)];
    w += nuclei[rng.below(n_nuclei)];
  }
  w += codas[rng.below(n_codas)];
  return w;
}

const char* const kDeOnsets[] = {"b", "d", "g", "k", "l", "m", "n", "r", "s", "t", "w", "z", "sch", "pf", "kr"};
const char* const kDeNuclei[] = {"a", "e", "i", "o", "u", "ei", "au", "ie"};
const char* const kDeCodas[] = {"", "n", "l", "r", "t", "ch"};
const char* const kEnOnsets[] = {"b", "d", "f", "g", "h", "j", "p", "qu", "sn", "tr", "v", "y", "gl", "pl", "th"};
const char* const kEnNuclei[] = {"a", "i", "o", "u", "oo", "ee", "ay"};
const char* const kEnCodas[] = {"", "p", "x", "ck", "m", "ng", "ff"};

struct Lexicon {
  std::vector<std::string> noun_de, noun_en, adj_de, adj_en, verb_stem, verb_en;
  std::vector<Gender> gender;
  std::vector<std::array<std::string, 4>> verb_de;  // ich, du, er, wir
  std::vector<std::array<std::string, 2>> verb_en_forms;
};

std::string unique_word(Rng& rng, std::unordered_set<std::string>& used, bool german) {
  for (;;) {
    std::string w = german ? pseudo_word(rng, kDeOnsets, std::size(kDeOnsets), kDeNuclei, std::size(kDeNuclei),
                                         kDeCodas, std::size(kDeCodas))
                           : pseudo_word(rng, kEnOnsets, std::size(kEnOnsets), kEnNuclei, std::size(kEnNuclei),
                                         kEnCodas, std::size(kEnCodas));
    if (used.insert(w).second) return w;
  }
}

const Lexicon& lexicon() {
  static const Lexicon lex = [] {
    Lexicon l;
    std::unordered_set<std::string> used;
    for (const auto& n : kBaseNouns) {
      l.noun_de.push_back(n.de);
      l.noun_en.push_back(n.en);
      l.gender.push_back(n.gender);
      used.insert(n.de);
      used.insert(n.en);
    }
    for (const auto& a : kBaseAdjectives) {
      l.adj_de.push_back(a.de);
      l.adj_en.push_back(a.en);
      used.insert(a.de);
      used.insert(a.en);
    }
    for (const auto& v : kBaseVerbs) {
      l.verb_de.push_back({v.de_ich, v.de_du, v.de_er, v.de_wir});
      l.verb_en_forms.push_back({v.en_base, v.en_third});
    }
    Rng rng(20240601);
    while (l.noun_de.size() < kNounCount) {
      l.noun_de.push_back(unique_word(rng, used, true));
      l.noun_en.push_back(unique_word(rng, used, false));
      l.gender.push_back(static_cast<Gender>(rng.below(3)));
    }
    while (l.adj_de.size() < kAdjectiveCount) {
      l.adj_de.push_back(unique_word(rng, used, true));
      l.adj_en.push_back(unique_word(rng, used, false));
    }
    while (l.verb_de.size() < kVerbCount) {
      const std::string stem = unique_word(rng, used, true);
      const std::string en = unique_word(rng, used, false);
      l.verb_de.push_back({stem + "e", stem + "st", stem + "t", stem + "en"});
      l.verb_en_forms.push_back({en, en + "s"});
    }
    return l;
  }();
  return lex;
}

// Index in [0, n) with probability proportional to 1 / (rank + 2).
std::size_t zipf(Rng& rng, std::size_t n) {
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) total += 1.0 / static_cast<double>(k + 2);
  double u = rng.uniform01() * total;
  for (std::size_t k = 0; k < n; ++k) {
    u -= 1.0 / static_cast<double>(k + 2);
    if (u < 0.0) return k;
  }
  return n - 1;
}

struct Phrase {
  std::string de;
  std::string en;
  int person = 3;
};

std::string article(Gender g, bool accusative) {
  if (g == kMasc) return accusative ? "den" : "der";
  if (g == kFem) return "die";
  return "das";
}

Phrase noun_phrase(Rng& rng, bool accusative) {
  const Lexicon& lex = lexicon();
  const std::size_t n = zipf(rng, lex.noun_de.size());
  const Gender g = lex.gender[n];
  Phrase p;
  p.de = article(g, accusative) + " ";
  p.en = "the ";
  if (rng.below(3) == 0) {
    const std::size_t a = zipf(rng, lex.adj_de.size());
    p.de += lex.adj_de[a] + (g == kMasc && accusative ? "en " : "e ");
    p.en += lex.adj_en[a] + " ";
  }
  p.de += lex.noun_de[n];
  p.en += lex.noun_en[n];
  return p;
}

Phrase subject(Rng& rng) {
  if (rng.below(3) == 0) {
    const Pronoun& pr = kPronouns[rng.below(std::size(kPronouns))];
    return {pr.de, pr.en, pr.person};
  }
  return noun_phrase(rng, false);
}

std::string de_verb(std::size_t v, int person) {
  const auto& forms = lexicon().verb_de[v];
  switch (person) {
    case 1: return forms[0];
    case 2: return forms[1];
    case 4: return forms[3];
    default: return forms[2];
  }
}

std::string en_verb(std::size_t v, int person) { return lexicon().verb_en_forms[v][person == 3 ? 1 : 0]; }

std::string en_base(std::size_t v) { return lexicon().verb_en_forms[v][0]; }

const char* en_do(int person) { return person == 3 ? "does" : "do"; }

// One clause as (German main-clause order, German verb-final order, English).
struct Clause {
  Phrase subj;
  Phrase obj;
  std::size_t verb;
};

Clause clause(Rng& rng) {
  Phrase subj = subject(rng);
  Phrase obj = noun_phrase(rng, true);
  return {std::move(subj), std::move(obj), zipf(rng, lexicon().verb_de.size())};
}

SyntheticPair sentence(Rng& rng) {
  Clause c = clause(rng);
  const std::string v_de = de_verb(c.verb, c.subj.person);
  const std::string v_en = en_verb(c.verb, c.subj.person);
  switch (rng.below(5)) {
    case 0:
      return {c.subj.en + " " + v_en + " " + c.obj.en + " .", c.subj.de + " " + v_de + " " + c.obj.de + " ."};
    case 1: {
      const auto& t = kTimes[rng.below(std::size(kTimes))];
      return {std::string(t.second) + " " + c.subj.en + " " + v_en + " " + c.obj.en + " .",
              std::string(t.first) + " " + v_de + " " + c.subj.de + " " + c.obj.de + " ."};
    }
    case 2:
      return {std::string(en_do(c.subj.person)) + " " + c.subj.en + " " + en_base(c.verb) + " " + c.obj.en + " ?",
              v_de + " " + c.subj.de + " " + c.obj.de + " ?"};
    case 3:
      return {c.subj.en + " " + en_do(c.subj.person) + " not " + en_base(c.verb) + " " + c.obj.en + " .",
              c.subj.de + " " + v_de + " " + c.obj.de + " nicht ."};
    default: {
      Clause s = clause(rng);
      const auto& conj = kConjunctions[rng.below(std::size(kConjunctions))];
      return {c.subj.en + " " + v_en + " " + c.obj.en + " " + conj.second + " " + s.subj.en + " " +
                  en_verb(s.verb, s.subj.person) + " " + s.obj.en + " .",
              c.subj.de + " " + v_de + " " + c.obj.de + " , " + conj.first + " " + s.subj.de + " " + s.obj.de +
                  " " + de_verb(s.verb, s.subj.person) + " ."};
    }
  }
}

}  // namespace

std::vector<SyntheticPair> synthetic_pairs(std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<SyntheticPair> out;
  std::unordered_set<std::string> seen;
  std::size_t attempts = 0;
  while (out.size() < count) {
    if (++attempts > count * 100) throw std::runtime_error("synthetic grammar cannot produce enough pairs");
    SyntheticPair p = sentence(rng);
    if (seen.insert(p.german).second) out.push_back(std::move(p));
  }
  return out;
}

void write_synthetic_tsv(const std::filesystem::path& path, std::size_t count, std::uint64_t seed) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& p : synthetic_pairs(count, seed)) out << p.english << '\t' << p.german << '\n';
}

}  // namespace crnmt::testing
