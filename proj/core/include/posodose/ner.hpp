#pragma once

#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "posodose/normalizer.hpp"
#include "posodose/textutil.hpp"

namespace posodose {

enum class EntityType {
    BOUNDS, DOSE, DRUG, FORM, FREQUENCY, NUMBER_REPEATS,
    PERIOD, REASON, STRENGTH, TIME_OF_DAY, WHEN,
};
constexpr int kEntityTypeCount = 11;

std::string to_string(EntityType type);
std::optional<EntityType> parse_entity_type(std::string_view text);

/// A typed span over normalized text with parsed attributes. Attribute keys
/// depend on the type: DOSE {value, max_value?, unit_token?, role?},
/// PERIOD/BOUNDS {value, unit} or {start_date, end_date}, FREQUENCY {count,
/// max?}, TIME_OF_DAY {time}, WHEN {code | days, offset?}, REASON
/// {condition}, STRENGTH {value, unit}, NUMBER_REPEATS {count}.
struct Entity {
    EntityType type = EntityType::DOSE;
    std::size_t begin = 0;  // byte offsets into the normalized text
    std::size_t end = 0;
    std::string surface;
    nlohmann::json attributes = nlohmann::json::object();
    std::string rule_id;

    nlohmann::json to_json() const;
};

struct TraceEntry {
    std::string rule_id;
    std::size_t begin = 0;
    std::size_t end = 0;
};

/// Declarative token-pattern rules; grammar documented in docs/ner-rules.md.
class RuleSet {
public:
    struct PatternElement {
        enum class Atom {
            Number, Integer, Unit, MassUnit, TimeUnit, Clock, Date, Dow,
            Word, Literal, Drug, Form,
        };
        Atom atom = Atom::Literal;
        std::vector<std::string> literals;  // folded alternatives for Literal
        std::string capture;                // empty when not captured
        bool optional = false;
    };

    struct Rule {
        std::string id;
        EntityType type = EntityType::DOSE;
        int priority = 0;
        bool at_start = false;  // rule only fires at the first token
        std::vector<std::vector<PatternElement>> patterns;    // alternatives
        std::vector<std::pair<std::string, std::string>> sets;  // constant attrs
    };

    static RuleSet load(const std::string& path);
    static RuleSet parse(std::string_view text, const std::string& origin = "<inline>");

    const std::vector<Rule>& rules() const { return rules_; }
    const std::string& version() const { return version_; }

    bool is_unit_word(std::string_view folded) const { return unit_words_.count(std::string(folded)) > 0; }
    bool is_form_word(std::string_view folded) const { return form_words_.count(std::string(folded)) > 0; }
    bool is_mass_unit(std::string_view folded) const { return mass_units_.count(std::string(folded)) > 0; }
    /// Canonical period unit + multiplier for a French time-unit word
    /// ("trimestre" → {month, 3}); nullopt for other words.
    std::optional<std::pair<std::string, int>> time_unit(std::string_view folded) const;
    std::optional<std::string> dow(std::string_view folded) const;
    /// Longest drug-phrase match starting at token index `at`; returns the
    /// token count of the match, 0 when none.
    std::size_t drug_match(const std::vector<Token>& tokens, std::size_t at) const;

private:
    std::string version_;
    std::vector<Rule> rules_;
    std::set<std::string> unit_words_;
    std::set<std::string> form_words_;
    std::set<std::string> mass_units_;
    std::map<std::string, std::pair<std::string, int>> time_units_;
    std::map<std::string, std::string> dow_words_;
    std::vector<std::vector<std::string>> drug_phrases_;  // folded token seqs
};

/// Rule-based recognizer for the 11 posology entity types.
class Recognizer {
public:
    explicit Recognizer(RuleSet rules) : rules_(std::move(rules)) {}

    /// Typed entities over `text.normalized`, sorted by span start,
    /// non-overlapping within each type.
    std::vector<Entity> recognize(const NormalizedText& text) const;

    /// One entry per fired rule, before overlap resolution.
    std::vector<TraceEntry> pattern_trace(const NormalizedText& text) const;

    const RuleSet& rules() const { return rules_; }

private:
    struct Candidate {
        const RuleSet::Rule* rule;
        std::size_t token_begin;
        std::size_t token_end;
        Entity entity;
    };
    std::vector<Candidate> match_all(const NormalizedText& text,
                                     const std::vector<Token>& tokens) const;

    RuleSet rules_;
};

}  // namespace posodose
