#include "evotext/grammar.hpp"

#include <algorithm>
#include <limits>
#include <set>
#include <sstream>

#include "evotext/errors.hpp"
#include "evotext/text.hpp"

namespace evotext {

namespace {

struct FlatRule {
    std::string lhs;
    std::vector<std::string> rhs;
};

std::vector<FlatRule> flatten(const Cfg& grammar) {
    std::vector<FlatRule> rules;
    for (const auto& [lhs, prods] : grammar.rules) {
        for (const auto& rhs : prods) rules.push_back({lhs, rhs});
    }
    return rules;
}

std::set<std::string> nullable_set(const std::vector<FlatRule>& rules) {
    std::set<std::string> nullable;
    bool changed = true;
    while (changed) {
        changed = false;
        for (const auto& rule : rules) {
            if (nullable.count(rule.lhs)) continue;
            bool all = true;
            for (const auto& sym : rule.rhs) {
                if (!nullable.count(sym)) {
                    all = false;
                    break;
                }
            }
            if (all) {
                nullable.insert(rule.lhs);
                changed = true;
            }
        }
    }
    return nullable;
}

}  // namespace

std::vector<std::string> Cfg::terminals() const {
    std::set<std::string> seen;
    for (const auto& [lhs, prods] : rules) {
        for (const auto& rhs : prods) {
            for (const auto& sym : rhs) {
                if (!is_nonterminal(sym)) seen.insert(sym);
            }
        }
    }
    return {seen.begin(), seen.end()};
}

bool cfg_accepts(const Cfg& grammar, const std::vector<std::string>& words) {
    if (!grammar.is_nonterminal(grammar.start)) {
        throw ContractError("cfg_accepts: start symbol has no productions");
    }
    const auto rules = flatten(grammar);
    const auto nullable = nullable_set(rules);

    struct Item {
        std::size_t rule, dot, origin;
        bool operator<(const Item& o) const {
            return std::tie(rule, dot, origin) < std::tie(o.rule, o.dot, o.origin);
        }
    };
    const std::size_t n = words.size();
    std::vector<std::vector<Item>> chart(n + 1);
    std::vector<std::set<Item>> seen(n + 1);
    auto push = [&](std::size_t pos, Item item) {
        if (seen[pos].insert(item).second) chart[pos].push_back(item);
    };

    for (std::size_t r = 0; r < rules.size(); ++r) {
        if (rules[r].lhs == grammar.start) push(0, {r, 0, 0});
    }
    for (std::size_t pos = 0; pos <= n; ++pos) {
        for (std::size_t idx = 0; idx < chart[pos].size(); ++idx) {
            const Item item = chart[pos][idx];
            const auto& rhs = rules[item.rule].rhs;
            if (item.dot == rhs.size()) {
                // completion: advance items waiting on this nonterminal
                const std::string& done = rules[item.rule].lhs;
                for (std::size_t j = 0; j < chart[item.origin].size(); ++j) {
                    const Item waiting = chart[item.origin][j];
                    const auto& wrhs = rules[waiting.rule].rhs;
                    if (waiting.dot < wrhs.size() && wrhs[waiting.dot] == done) {
                        push(pos, {waiting.rule, waiting.dot + 1, waiting.origin});
                    }
                }
            } else if (grammar.is_nonterminal(rhs[item.dot])) {
                // prediction, with the nullable shortcut so empty derivations
                // complete even though the completer scans a snapshot
                for (std::size_t r = 0; r < rules.size(); ++r) {
                    if (rules[r].lhs == rhs[item.dot]) push(pos, {r, 0, pos});
                }
                if (nullable.count(rhs[item.dot])) {
                    push(pos, {item.rule, item.dot + 1, item.origin});
                }
            } else if (pos < n && rhs[item.dot] == words[pos]) {
                push(pos + 1, {item.rule, item.dot + 1, item.origin});
            }
        }
    }
    for (const Item& item : chart[n]) {
        if (item.origin == 0 && item.dot == rules[item.rule].rhs.size() &&
            rules[item.rule].lhs == grammar.start) {
            return true;
        }
    }
    return false;
}

bool cfg_accepts(const Cfg& grammar, const std::string& sentence) {
    return cfg_accepts(grammar, tokenize(sentence, TokenizerMode::word));
}

namespace {

// Fewest expansion levels needed to reach an all-terminal string from each
// nonterminal; used to force termination once the depth budget is spent.
std::map<std::string, std::size_t> min_depths(const Cfg& grammar) {
    constexpr auto inf = std::numeric_limits<std::size_t>::max();
    std::map<std::string, std::size_t> depth;
    for (const auto& [lhs, prods] : grammar.rules) depth[lhs] = inf;
    bool changed = true;
    while (changed) {
        changed = false;
        for (const auto& [lhs, prods] : grammar.rules) {
            for (const auto& rhs : prods) {
                std::size_t worst = 0;
                for (const auto& sym : rhs) {
                    if (!grammar.is_nonterminal(sym)) continue;
                    worst = std::max(worst, depth[sym]);
                }
                const std::size_t cand = worst == inf ? inf : worst + 1;
                if (cand < depth[lhs]) {
                    depth[lhs] = cand;
                    changed = true;
                }
            }
        }
    }
    for (const auto& [lhs, d] : depth) {
        if (d == inf) throw ContractError("cfg_sample: nonterminal " + lhs + " never terminates");
    }
    return depth;
}

std::size_t production_cost(const Cfg& grammar, const std::map<std::string, std::size_t>& depth,
                            const std::vector<std::string>& rhs) {
    std::size_t worst = 0;
    for (const auto& sym : rhs) {
        if (grammar.is_nonterminal(sym)) worst = std::max(worst, depth.at(sym));
    }
    return worst;
}

void expand(const Cfg& grammar, const std::map<std::string, std::size_t>& depth,
            const std::string& sym, Rng& rng, std::size_t budget, std::vector<std::string>& out) {
    if (!grammar.is_nonterminal(sym)) {
        out.push_back(sym);
        return;
    }
    const auto& prods = grammar.rules.at(sym);
    std::size_t pick;
    if (budget == 0) {
        pick = 0;
        for (std::size_t i = 1; i < prods.size(); ++i) {
            if (production_cost(grammar, depth, prods[i]) <
                production_cost(grammar, depth, prods[pick])) {
                pick = i;
            }
        }
    } else {
        pick = rng.uniform_index(prods.size());
    }
    for (const auto& child : prods[pick]) {
        expand(grammar, depth, child, rng, budget == 0 ? 0 : budget - 1, out);
    }
}

}  // namespace

std::vector<std::string> cfg_sample(const Cfg& grammar, Rng& rng, std::size_t max_depth) {
    const auto depth = min_depths(grammar);
    std::vector<std::string> out;
    expand(grammar, depth, grammar.start, rng, max_depth, out);
    return out;
}

bool corrupt_sentence(const Cfg& grammar, const std::vector<std::string>& words, Rng& rng,
                      std::vector<std::string>& out) {
    for (int attempt = 0; attempt < 64; ++attempt) {
        std::vector<std::string> cand = words;
        switch (rng.uniform_index(4)) {
            case 0: {  // adjacent swap
                if (cand.size() < 2) break;
                const std::size_t i = rng.uniform_index(cand.size() - 1);
                std::swap(cand[i], cand[i + 1]);
                break;
            }
            case 1: {  // deletion
                if (cand.size() < 2) break;
                cand.erase(cand.begin() + static_cast<std::ptrdiff_t>(
                                              rng.uniform_index(cand.size())));
                break;
            }
            case 2: {  // duplication
                if (cand.empty()) break;
                const std::size_t i = rng.uniform_index(cand.size());
                cand.insert(cand.begin() + static_cast<std::ptrdiff_t>(i), cand[i]);
                break;
            }
            default: {  // shuffle
                rng.shuffle(cand);
                break;
            }
        }
        if (cand != words && !cand.empty() && !cfg_accepts(grammar, cand)) {
            out = std::move(cand);
            return true;
        }
    }
    return false;
}

Cfg demo_grammar() {
    Cfg g;
    g.start = "S";
    g.rules["S"] = {{"NP", "VP"}};
    g.rules["NP"] = {{"Det", "N"}, {"Det", "Adj", "N"}, {"Name"}};
    g.rules["VP"] = {{"Vi"}, {"Vi", "Adv"}, {"Vt", "NP"}, {"Vt", "NP", "Adv"}};
    g.rules["Det"] = {{"the"}, {"a"}, {"every"}, {"some"}, {"this"}};
    g.rules["N"] = {{"dog"},    {"cat"},    {"bird"},   {"man"},    {"woman"},
                    {"child"},  {"horse"},  {"teacher"}, {"farmer"}, {"doctor"},
                    {"lawyer"}, {"singer"}, {"robot"},  {"wizard"}, {"river"},
                    {"garden"}, {"book"},   {"stone"},  {"apple"},  {"piano"}};
    g.rules["Adj"] = {{"big"},   {"small"},  {"happy"},  {"quiet"}, {"red"},
                      {"old"},   {"young"},  {"clever"}, {"strange"}, {"bright"}};
    g.rules["Vi"] = {{"sleeps"}, {"runs"},  {"sings"},  {"jumps"},  {"smiles"},
                     {"falls"},  {"waits"}, {"dances"}, {"laughs"}, {"swims"}};
    g.rules["Vt"] = {{"sees"},  {"likes"},   {"chases"},  {"finds"},  {"helps"},
                     {"follows"}, {"carries"}, {"greets"}, {"watches"}, {"draws"}};
    g.rules["Name"] = {{"alice"}, {"bob"},   {"carol"}, {"dave"},
                       {"erin"},  {"frank"}, {"grace"}, {"heidi"}};
    g.rules["Adv"] = {{"quickly"}, {"slowly"}, {"gladly"},  {"often"},
                      {"never"},   {"quietly"}, {"badly"},  {"well"}};
    return g;
}

Cfg new_domain_grammar() {
    Cfg g;
    g.start = "S";
    g.rules["S"] = {{"NP", "VP"}};
    g.rules["NP"] = {{"Det", "N"}, {"Det", "Adj", "N"}, {"Name"}};
    g.rules["VP"] = {{"Vi"}, {"Vi", "Adv"}, {"Vt", "NP"}, {"Vt", "NP", "Adv"}};
    g.rules["Det"] = {{"il"}, {"un"}, {"ogni"}, {"questo"}, {"quel"}};
    g.rules["N"] = {{"gatto"}, {"cane"},    {"uccello"},  {"maestro"}, {"dottore"},
                    {"libro"}, {"fiume"},   {"giardino"}, {"sasso"},   {"pianoforte"}};
    g.rules["Adj"] = {{"grande"}, {"piccolo"}, {"felice"}, {"rosso"}, {"vecchio"}};
    g.rules["Vi"] = {{"dorme"}, {"corre"}, {"canta"}, {"salta"}, {"sorride"}};
    g.rules["Vt"] = {{"vede"}, {"insegue"}, {"trova"}, {"aiuta"}, {"segue"}};
    g.rules["Name"] = {{"mario"}, {"luigi"}, {"anna"}, {"paola"}};
    g.rules["Adv"] = {{"presto"}, {"lentamente"}, {"spesso"}, {"mai"}, {"bene"}};
    return g;
}

}  // namespace evotext
