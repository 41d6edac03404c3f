#include "posodose/ner.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace posodose {

namespace {

const std::array<const char*, kEntityTypeCount> kTypeNames = {
    "BOUNDS", "DOSE", "DRUG", "FORM", "FREQUENCY", "NUMBER_REPEATS",
    "PERIOD", "REASON", "STRENGTH", "TIME_OF_DAY", "WHEN",
};

std::vector<std::string> split_ws(std::string_view line) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
        if (j > i) out.emplace_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

}  // namespace

std::string to_string(EntityType type) { return kTypeNames[static_cast<int>(type)]; }

std::optional<EntityType> parse_entity_type(std::string_view text) {
    for (int i = 0; i < kEntityTypeCount; ++i)
        if (text == kTypeNames[i]) return static_cast<EntityType>(i);
    return std::nullopt;
}

nlohmann::json Entity::to_json() const {
    return {{"type", posodose::to_string(type)},
            {"begin", begin},
            {"end", end},
            {"surface", surface},
            {"attributes", attributes},
            {"rule_id", rule_id}};
}

// ---------------------------------------------------------------------------
// RuleSet parsing
// ---------------------------------------------------------------------------

RuleSet RuleSet::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open NER rule file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str(), path);
}

std::optional<std::pair<std::string, int>> RuleSet::time_unit(std::string_view folded) const {
    auto it = time_units_.find(std::string(folded));
    if (it == time_units_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::string> RuleSet::dow(std::string_view folded) const {
    auto it = dow_words_.find(std::string(folded));
    if (it == dow_words_.end()) return std::nullopt;
    return it->second;
}

std::size_t RuleSet::drug_match(const std::vector<Token>& tokens, std::size_t at) const {
    std::size_t best = 0;
    for (const auto& phrase : drug_phrases_) {
        if (phrase.size() <= best) continue;
        if (at + phrase.size() > tokens.size()) continue;
        bool ok = true;
        for (std::size_t k = 0; k < phrase.size(); ++k) {
            if (tokens[at + k].folded != phrase[k]) {
                ok = false;
                break;
            }
        }
        if (ok) best = phrase.size();
    }
    return best;
}

RuleSet RuleSet::parse(std::string_view text, const std::string& origin) {
    RuleSet rs;
    std::vector<std::string> lines;
    {
        std::size_t pos = 0;
        while (pos <= text.size()) {
            std::size_t eol = text.find('\n', pos);
            if (eol == std::string_view::npos) eol = text.size();
            std::string line(text.substr(pos, eol - pos));
            if (!line.empty() && line.back() == '\r') line.pop_back();
            lines.push_back(std::move(line));
            pos = eol + 1;
            if (pos > text.size()) break;
        }
    }

    auto fail = [&](std::size_t lineno, const std::string& message) {
        throw std::runtime_error(origin + ":" + std::to_string(lineno + 1) + ": " + message);
    };

    auto parse_element = [&](const std::string& word, std::size_t lineno) {
        PatternElement el;
        std::string body = word;
        if (!body.empty() && body.back() == '?') {
            el.optional = true;
            body.pop_back();
        }
        if (auto colon = body.find(':'); colon != std::string::npos && body.compare(0, 1, "@") != 0) {
            el.capture = body.substr(0, colon);
            body = body.substr(colon + 1);
        }
        if (body.empty()) fail(lineno, "empty pattern element");
        if (body[0] == '@') {
            static const std::map<std::string, PatternElement::Atom> atoms = {
                {"@num", PatternElement::Atom::Number},
                {"@int", PatternElement::Atom::Integer},
                {"@unit", PatternElement::Atom::Unit},
                {"@massunit", PatternElement::Atom::MassUnit},
                {"@timeunit", PatternElement::Atom::TimeUnit},
                {"@clock", PatternElement::Atom::Clock},
                {"@date", PatternElement::Atom::Date},
                {"@dow", PatternElement::Atom::Dow},
                {"@word", PatternElement::Atom::Word},
                {"@drug", PatternElement::Atom::Drug},
                {"@form", PatternElement::Atom::Form},
            };
            auto it = atoms.find(body);
            if (it == atoms.end()) fail(lineno, "unknown atom '" + body + "'");
            el.atom = it->second;
        } else {
            el.atom = PatternElement::Atom::Literal;
            std::size_t start = 0;
            for (std::size_t i = 0; i <= body.size(); ++i) {
                if (i == body.size() || body[i] == '|') {
                    el.literals.push_back(fold_accents(body.substr(start, i - start)));
                    start = i + 1;
                }
            }
        }
        return el;
    };

    Rule current;
    bool in_rule = false;
    for (std::size_t n = 0; n < lines.size(); ++n) {
        auto words = split_ws(lines[n]);
        if (words.empty() || words[0][0] == '#') continue;
        const std::string& head = words[0];

        if (head == "version") {
            if (words.size() < 2) fail(n, "version needs a value");
            rs.version_ = words[1];
        } else if (head == "unitword") {
            for (std::size_t i = 1; i < words.size(); ++i)
                rs.unit_words_.insert(fold_accents(words[i]));
        } else if (head == "formword") {
            for (std::size_t i = 1; i < words.size(); ++i)
                rs.form_words_.insert(fold_accents(words[i]));
        } else if (head == "massunit") {
            for (std::size_t i = 1; i < words.size(); ++i)
                rs.mass_units_.insert(fold_accents(words[i]));
        } else if (head == "timeunit") {
            if (words.size() != 4) fail(n, "timeunit <word> <unit> <factor>");
            if (!parse_period_unit(words[2])) fail(n, "unknown period unit '" + words[2] + "'");
            rs.time_units_[fold_accents(words[1])] = {words[2], std::stoi(words[3])};
        } else if (head == "dow") {
            if (words.size() != 3) fail(n, "dow <word> <mon..sun>");
            if (!parse_day_of_week(words[2])) fail(n, "unknown weekday '" + words[2] + "'");
            rs.dow_words_[fold_accents(words[1])] = words[2];
        } else if (head == "drug") {
            std::vector<std::string> phrase;
            for (std::size_t i = 1; i < words.size(); ++i)
                phrase.push_back(fold_accents(words[i]));
            if (!phrase.empty()) rs.drug_phrases_.push_back(std::move(phrase));
        } else if (head == "rule") {
            if (in_rule) fail(n, "nested rule (missing 'end'?)");
            if (words.size() != 4) fail(n, "rule <id> <TYPE> <priority>");
            current = Rule{};
            current.id = words[1];
            auto type = parse_entity_type(words[2]);
            if (!type) fail(n, "unknown entity type '" + words[2] + "'");
            current.type = *type;
            current.priority = std::stoi(words[3]);
            in_rule = true;
        } else if (head == "match") {
            if (!in_rule) fail(n, "'match' outside a rule");
            std::vector<PatternElement> pattern;
            for (std::size_t i = 1; i < words.size(); ++i)
                pattern.push_back(parse_element(words[i], n));
            if (pattern.empty()) fail(n, "empty pattern");
            current.patterns.push_back(std::move(pattern));
        } else if (head == "set") {
            if (!in_rule) fail(n, "'set' outside a rule");
            if (words.size() != 3) fail(n, "set <key> <value>");
            current.sets.emplace_back(words[1], words[2]);
        } else if (head == "at_start") {
            if (!in_rule) fail(n, "'at_start' outside a rule");
            current.at_start = true;
        } else if (head == "end") {
            if (!in_rule) fail(n, "'end' outside a rule");
            if (current.patterns.empty()) fail(n, "rule without patterns");
            for (const auto& r : rs.rules_)
                if (r.id == current.id) fail(n, "duplicate rule id '" + current.id + "'");
            rs.rules_.push_back(std::move(current));
            in_rule = false;
        } else {
            fail(n, "unknown directive '" + head + "'");
        }
    }
    if (in_rule) throw std::runtime_error(origin + ": unterminated rule block");
    return rs;
}

// ---------------------------------------------------------------------------
// Matching
// ---------------------------------------------------------------------------

namespace {

struct MatchState {
    std::map<std::string, std::size_t> captures;  // capture name → token index
    std::size_t end_token = 0;
};

}  // namespace

std::vector<Recognizer::Candidate> Recognizer::match_all(
    const NormalizedText& text, const std::vector<Token>& tokens) const {
    std::vector<Candidate> candidates;

    auto atom_matches = [&](const RuleSet::PatternElement& el, std::size_t ti) {
        const Token& tok = tokens[ti];
        using Atom = RuleSet::PatternElement::Atom;
        switch (el.atom) {
            case Atom::Number:
                return tok.kind == TokenKind::Number && tok.number.has_value();
            case Atom::Integer:
                return tok.kind == TokenKind::Number && tok.number &&
                       tok.number->is_integral();
            case Atom::Unit:
                return tok.kind == TokenKind::Word && rules_.is_unit_word(tok.folded);
            case Atom::MassUnit:
                return tok.kind == TokenKind::Word && rules_.is_mass_unit(tok.folded);
            case Atom::TimeUnit:
                return tok.kind == TokenKind::Word && rules_.time_unit(tok.folded).has_value();
            case Atom::Clock:
                return tok.kind == TokenKind::Clock;
            case Atom::Date:
                return tok.kind == TokenKind::Date;
            case Atom::Dow:
                return tok.kind == TokenKind::Word && rules_.dow(tok.folded).has_value();
            case Atom::Word:
                return tok.kind == TokenKind::Word;
            case Atom::Form:
                return tok.kind == TokenKind::Word && rules_.is_form_word(tok.folded);
            case Atom::Literal:
                return std::find(el.literals.begin(), el.literals.end(), tok.folded) !=
                       el.literals.end();
            case Atom::Drug:
                return false;  // handled separately (multi-token)
        }
        return false;
    };

    // Recursive descent over pattern elements with optional-element branching.
    // Patterns are short (< 8 elements), so this stays cheap.
    std::function<bool(const std::vector<RuleSet::PatternElement>&, std::size_t,
                       std::size_t, MatchState&)>
        try_match = [&](const std::vector<RuleSet::PatternElement>& pattern,
                        std::size_t pi, std::size_t ti, MatchState& state) -> bool {
        if (pi == pattern.size()) {
            state.end_token = ti;
            return true;
        }
        const auto& el = pattern[pi];
        if (el.atom == RuleSet::PatternElement::Atom::Drug) {
            std::size_t len = ti < tokens.size() ? rules_.drug_match(tokens, ti) : 0;
            if (len > 0) {
                if (!el.capture.empty()) state.captures[el.capture] = ti;
                if (try_match(pattern, pi + 1, ti + len, state)) return true;
                if (!el.capture.empty()) state.captures.erase(el.capture);
            }
            if (el.optional) return try_match(pattern, pi + 1, ti, state);
            return false;
        }
        if (ti < tokens.size() && atom_matches(el, ti)) {
            if (!el.capture.empty()) state.captures[el.capture] = ti;
            if (try_match(pattern, pi + 1, ti + 1, state)) return true;
            if (!el.capture.empty()) state.captures.erase(el.capture);
        }
        if (el.optional) return try_match(pattern, pi + 1, ti, state);
        return false;
    };

    for (const auto& rule : rules_.rules()) {
        for (const auto& pattern : rule.patterns) {
            std::size_t last_start = rule.at_start ? 1 : tokens.size();
            for (std::size_t start = 0; start < last_start; ++start) {
                MatchState state;
                if (!try_match(pattern, 0, start, state)) continue;
                if (state.end_token == start) continue;  // zero-width match

                Candidate cand;
                cand.rule = &rule;
                cand.token_begin = start;
                cand.token_end = state.end_token;

                Entity& e = cand.entity;
                e.type = rule.type;
                e.rule_id = rule.id;
                e.begin = tokens[start].begin;
                e.end = tokens[state.end_token - 1].end;
                e.surface = text.normalized.substr(e.begin, e.end - e.begin);

                bool ok = true;
                for (const auto& [name, ti] : state.captures) {
                    const Token& tok = tokens[ti];
                    switch (tok.kind) {
                        case TokenKind::Number: {
                            e.attributes[name] = tok.number->to_string();
                            break;
                        }
                        case TokenKind::Clock:
                            e.attributes[name] = *tok.clock;
                            break;
                        case TokenKind::Date:
                            e.attributes[name] = *tok.date;
                            break;
                        case TokenKind::Word:
                            e.attributes[name] = tok.surface;
                            break;
                    }
                }
                for (const auto& [key, value] : rule.sets) e.attributes[key] = value;

                // Type-specific attribute finishing.
                auto num_at = [&](const char* key) -> std::optional<Decimal> {
                    if (!e.attributes.contains(key)) return std::nullopt;
                    return Decimal::try_parse(e.attributes[key].get<std::string>());
                };
                switch (rule.type) {
                    case EntityType::DOSE: {
                        if (!e.attributes.contains("value")) e.attributes["value"] = "1";
                        if (state.captures.count("unit"))
                            e.attributes["unit_token"] = tokens[state.captures["unit"]].surface;
                        e.attributes.erase("unit");
                        break;
                    }
                    case EntityType::STRENGTH: {
                        if (state.captures.count("unit"))
                            e.attributes["unit_token"] = tokens[state.captures["unit"]].folded;
                        e.attributes.erase("unit");
                        break;
                    }
                    case EntityType::PERIOD:
                    case EntityType::BOUNDS: {
                        if (state.captures.count("unit")) {
                            auto tu = rules_.time_unit(tokens[state.captures["unit"]].folded);
                            if (!tu) { ok = false; break; }
                            auto value = num_at("value").value_or(Decimal(1));
                            auto scaled = value * tu->second;
                            if (rule.type == EntityType::PERIOD && !scaled.is_integral()) {
                                ok = false;  // periods are whole numbers
                                break;
                            }
                            e.attributes["value"] = scaled.to_string();
                            if (auto mx = num_at("max_value"))
                                e.attributes["max_value"] = (*mx * tu->second).to_string();
                            e.attributes["unit"] = tu->first;
                        }
                        break;
                    }
                    case EntityType::TIME_OF_DAY: {
                        if (state.captures.count("hour")) {
                            auto hour = num_at("hour");
                            if (!hour || !hour->is_integral() || hour->integral_value() > 23) {
                                ok = false;
                                break;
                            }
                            auto h = hour->integral_value();
                            std::string hh = (h < 10 ? "0" : "") + std::to_string(h);
                            e.attributes["time"] = hh + ":00:00";
                            e.attributes.erase("hour");
                        }
                        break;
                    }
                    case EntityType::WHEN: {
                        if (state.captures.count("day")) {
                            auto day = rules_.dow(tokens[state.captures["day"]].folded);
                            if (!day) { ok = false; break; }
                            e.attributes["days"] = nlohmann::json::array({*day});
                            e.attributes.erase("day");
                        }
                        if (state.captures.count("offset_value")) {
                            std::string unit = "minutes";
                            if (state.captures.count("offset_unit"))
                                unit = tokens[state.captures["offset_unit"]].surface;
                            e.attributes["offset"] =
                                e.attributes["offset_value"].get<std::string>() + " " + unit;
                            e.attributes.erase("offset_value");
                            e.attributes.erase("offset_unit");
                        }
                        break;
                    }
                    case EntityType::REASON: {
                        e.attributes["condition"] = e.surface;
                        break;
                    }
                    case EntityType::FREQUENCY: {
                        if (!e.attributes.contains("count")) ok = false;
                        break;
                    }
                    case EntityType::NUMBER_REPEATS: {
                        if (!e.attributes.contains("count")) e.attributes["count"] = "1";
                        break;
                    }
                    case EntityType::DRUG: {
                        e.attributes["name"] = e.surface;
                        break;
                    }
                    default:
                        break;
                }
                if (ok) candidates.push_back(std::move(cand));
            }
        }
    }
    return candidates;
}

std::vector<TraceEntry> Recognizer::pattern_trace(const NormalizedText& text) const {
    auto tokens = tokenize(text.normalized);
    std::vector<TraceEntry> trace;
    for (const auto& cand : match_all(text, tokens))
        trace.push_back({cand.rule->id, cand.entity.begin, cand.entity.end});
    std::sort(trace.begin(), trace.end(), [](const auto& a, const auto& b) {
        return std::tie(a.begin, a.end, a.rule_id) < std::tie(b.begin, b.end, b.rule_id);
    });
    return trace;
}

std::vector<Entity> Recognizer::recognize(const NormalizedText& text) const {
    auto tokens = tokenize(text.normalized);
    auto candidates = match_all(text, tokens);

    // Deterministic resolution order: longer spans first, then priority,
    // then leftmost, then rule id.
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        auto len_a = a.token_end - a.token_begin;
        auto len_b = b.token_end - b.token_begin;
        if (len_a != len_b) return len_a > len_b;
        if (a.rule->priority != b.rule->priority) return a.rule->priority > b.rule->priority;
        if (a.token_begin != b.token_begin) return a.token_begin < b.token_begin;
        return a.rule->id < b.rule->id;
    });

    auto overlaps = [](const Candidate& a, const Candidate& b) {
        return a.token_begin < b.token_end && b.token_begin < a.token_end;
    };
    auto contained_in = [](const Candidate& inner, const Candidate& outer) {
        return inner.token_begin >= outer.token_begin && inner.token_end <= outer.token_end;
    };
    // Cross-type pairs where a contained entity is absorbed by its container.
    auto suppressed_by = [](EntityType inner, EntityType outer) {
        if (outer == EntityType::DOSE && (inner == EntityType::FORM || inner == EntityType::STRENGTH))
            return true;
        if (outer == EntityType::NUMBER_REPEATS &&
            (inner == EntityType::FREQUENCY || inner == EntityType::DOSE))
            return true;
        if (outer == EntityType::TIME_OF_DAY && inner == EntityType::PERIOD) return true;
        if (outer == EntityType::BOUNDS && inner == EntityType::PERIOD) return true;
        return false;
    };

    std::vector<Candidate> kept;
    for (auto& cand : candidates) {
        bool drop = false;
        for (const auto& k : kept) {
            if (!overlaps(cand, k)) continue;
            if (k.entity.type == cand.entity.type) {
                drop = true;  // same-type overlap: first (longer/stronger) wins
                break;
            }
            if (contained_in(cand, k) && suppressed_by(cand.entity.type, k.entity.type)) {
                drop = true;
                break;
            }
            if (cand.token_begin == k.token_begin && cand.token_end == k.token_end &&
                cand.rule->priority < k.rule->priority) {
                drop = true;  // identical span, lower priority type loses
                break;
            }
        }
        if (!drop) kept.push_back(std::move(cand));
    }

    std::vector<Entity> entities;
    entities.reserve(kept.size());
    for (auto& cand : kept) entities.push_back(std::move(cand.entity));
    std::sort(entities.begin(), entities.end(), [](const Entity& a, const Entity& b) {
        return std::tie(a.begin, a.end) < std::tie(b.begin, b.end);
    });
    return entities;
}

}  // namespace posodose
