#pragma once

#include <map>
#include <string>
#include <vector>

#include "evotext/rng.hpp"

namespace evotext {

// Context-free grammar over word symbols. A symbol is a nonterminal iff it
// has at least one production.
struct Cfg {
    std::string start;
    std::map<std::string, std::vector<std::vector<std::string>>> rules;

    bool is_nonterminal(const std::string& sym) const { return rules.count(sym) > 0; }
    std::vector<std::string> terminals() const;
};

// Earley recognizer; handles empty productions.
bool cfg_accepts(const Cfg& grammar, const std::vector<std::string>& words);
bool cfg_accepts(const Cfg& grammar, const std::string& sentence);

// Seeded derivation sampler. Beyond max_depth the production with the fewest
// nonterminals is taken, so sampling always terminates.
std::vector<std::string> cfg_sample(const Cfg& grammar, Rng& rng, std::size_t max_depth = 16);

// Seeded corruption for negative examples: adjacent swap, word deletion, word
// duplication, or full shuffle. Retries until the result leaves the grammar
// (up to a bounded number of attempts; returns false if none found).
bool corrupt_sentence(const Cfg& grammar, const std::vector<std::string>& words, Rng& rng,
                      std::vector<std::string>& out);

// Fixture grammars for the synthetic experiments: a small English-like
// language, and a token-disjoint "new domain" language for knowledge updates.
Cfg demo_grammar();
Cfg new_domain_grammar();

}  // namespace evotext
