#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "posodose/ner.hpp"
#include "posodose/schema.hpp"

namespace posodose {

struct CompositionResult {
    std::vector<PosologyStructure> records;
    std::vector<std::string> warnings;
};

/// Declarative composition rules: timing-default rules, the meal/day-part
/// merge table, conjunction semantics and the attachment window.
/// Grammar documented in docs/composition-rules.md.
class ComposeRules {
public:
    enum class Conj { additive, alternative };

    struct DefaultRule {
        std::string id;
        int priority = 0;
        // Every `has` group must have at least one present cue; no `lacks`
        // cue may be present. Cue names: dose, when, dow, tod, frequency,
        // period, bounds, reason, repeats, maxdose.
        std::vector<std::vector<std::string>> has;
        std::vector<std::string> lacks;
        // field → value; value may be a literal or a builtin (when_groups,
        // tod_count).
        std::vector<std::pair<std::string, std::string>> effects;
    };

    static ComposeRules load(const std::string& path);
    static ComposeRules parse(std::string_view text, const std::string& origin = "<inline>");

    const std::string& version() const { return version_; }
    int attach_window() const { return attach_window_; }
    std::optional<std::string> merge(const std::string& a, const std::string& b) const;
    std::optional<Conj> conjunction(std::string_view folded_word) const;
    const std::vector<DefaultRule>& default_rules() const { return rules_; }

private:
    std::string version_;
    int attach_window_ = 12;
    std::map<std::pair<std::string, std::string>, std::string> merges_;
    std::map<std::string, Conj> conj_words_;
    std::vector<DefaultRule> rules_;
};

/// Deterministic anchor-and-attach composition of entities into records:
/// every dose anchors one record, other cues attach to the nearest anchor.
class Composer {
public:
    explicit Composer(ComposeRules rules) : rules_(std::move(rules)) {}

    CompositionResult compose(const std::vector<Entity>& entities,
                              const NormalizedText& text) const;

    const ComposeRules& rules() const { return rules_; }

private:
    ComposeRules rules_;
};

struct WhenCodeResult {
    std::string code;
    std::optional<std::string> offset;
};

class UnmappedWhenPhrase : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Map a WHEN surface phrase to its FHIR event-timing code ("au coucher" →
/// HS, "le matin 30 minutes avant le repas" → ACM + offset). Throws
/// UnmappedWhenPhrase when the phrase is not covered by the rule base.
WhenCodeResult when_code(const std::string& phrase, const Normalizer& normalizer,
                         const Recognizer& recognizer, const ComposeRules& rules);

}  // namespace posodose
