#include "posodose/composer.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace posodose {

// ---------------------------------------------------------------------------
// ComposeRules parsing
// ---------------------------------------------------------------------------

namespace {

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

std::vector<std::string> split_alternatives(const std::string& word) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= word.size(); ++i) {
        if (i == word.size() || word[i] == '|') {
            out.push_back(word.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

}  // namespace

ComposeRules ComposeRules::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open composition rule file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str(), path);
}

ComposeRules ComposeRules::parse(std::string_view text, const std::string& origin) {
    ComposeRules rules;
    std::size_t pos = 0;
    std::size_t lineno = 0;
    DefaultRule current;
    bool in_rule = false;

    auto fail = [&](const std::string& message) {
        throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": " + message);
    };

    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string line(text.substr(pos, eol - pos));
        pos = eol + 1;
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto words = split_ws(line);
        if (pos > text.size() + 1) break;
        if (words.empty() || words[0][0] == '#') {
            if (eol == text.size()) break;
            continue;
        }
        const std::string& head = words[0];

        if (head == "version") {
            if (words.size() < 2) fail("version needs a value");
            rules.version_ = words[1];
        } else if (head == "attach_window") {
            if (words.size() != 2) fail("attach_window <tokens>");
            rules.attach_window_ = std::stoi(words[1]);
        } else if (head == "merge") {
            if (words.size() != 4) fail("merge <code> <code> <merged>");
            for (const auto& w : {words[1], words[2], words[3]})
                if (!when_code_order(w)) fail("unknown event-timing code '" + w + "'");
            rules.merges_[{words[1], words[2]}] = words[3];
            rules.merges_[{words[2], words[1]}] = words[3];
        } else if (head == "conj") {
            if (words.size() != 3) fail("conj <word> <additive|alternative>");
            if (words[2] == "additive")
                rules.conj_words_[fold_accents(words[1])] = Conj::additive;
            else if (words[2] == "alternative")
                rules.conj_words_[fold_accents(words[1])] = Conj::alternative;
            else
                fail("conjunction kind must be additive or alternative");
        } else if (head == "rule") {
            if (in_rule) fail("nested rule");
            if (words.size() != 3) fail("rule <id> <priority>");
            current = DefaultRule{};
            current.id = words[1];
            current.priority = std::stoi(words[2]);
            in_rule = true;
        } else if (head == "has") {
            if (!in_rule) fail("'has' outside a rule");
            if (words.size() != 2) fail("has <cue|cue...>");
            current.has.push_back(split_alternatives(words[1]));
        } else if (head == "lacks") {
            if (!in_rule) fail("'lacks' outside a rule");
            if (words.size() != 2) fail("lacks <cue|cue...>");
            for (auto& cue : split_alternatives(words[1])) current.lacks.push_back(cue);
        } else if (head == "set") {
            if (!in_rule) fail("set <field> <value>");
            if (words.size() != 3) fail("set <field> <value>");
            current.effects.emplace_back(words[1], words[2]);
        } else if (head == "end") {
            if (!in_rule) fail("'end' outside a rule");
            rules.rules_.push_back(std::move(current));
            in_rule = false;
        } else {
            fail("unknown directive '" + head + "'");
        }
        if (eol == text.size()) break;
    }
    if (in_rule) throw std::runtime_error(origin + ": unterminated rule block");
    std::sort(rules.rules_.begin(), rules.rules_.end(),
              [](const DefaultRule& a, const DefaultRule& b) { return a.priority < b.priority; });
    return rules;
}

std::optional<std::string> ComposeRules::merge(const std::string& a, const std::string& b) const {
    auto it = merges_.find({a, b});
    if (it == merges_.end()) return std::nullopt;
    return it->second;
}

std::optional<ComposeRules::Conj> ComposeRules::conjunction(std::string_view folded_word) const {
    auto it = conj_words_.find(std::string(folded_word));
    if (it == conj_words_.end()) return std::nullopt;
    return it->second;
}

// ---------------------------------------------------------------------------
// Composer
// ---------------------------------------------------------------------------

namespace {

struct Spanned {
    const Entity* entity;
    std::size_t token_begin;
    std::size_t token_end;
};

Decimal attr_decimal(const Entity& e, const char* key, Decimal fallback = Decimal(0)) {
    if (!e.attributes.contains(key)) return fallback;
    if (auto d = Decimal::try_parse(e.attributes.at(key).get<std::string>())) return *d;
    return fallback;
}

std::optional<Decimal> attr_decimal_opt(const Entity& e, const char* key) {
    if (!e.attributes.contains(key)) return std::nullopt;
    return Decimal::try_parse(e.attributes.at(key).get<std::string>());
}

std::optional<std::string> attr_string(const Entity& e, const char* key) {
    if (!e.attributes.contains(key)) return std::nullopt;
    return e.attributes.at(key).get<std::string>();
}

// Tokens strictly between two spans.
std::vector<const Token*> gap_tokens(const std::vector<Token>& tokens, std::size_t end_a,
                                     std::size_t begin_b) {
    std::vector<const Token*> out;
    for (const auto& t : tokens)
        if (t.begin >= end_a && t.end <= begin_b) out.push_back(&t);
    return out;
}

}  // namespace

CompositionResult Composer::compose(const std::vector<Entity>& entities,
                                    const NormalizedText& text) const {
    CompositionResult result;
    const auto tokens = tokenize(text.normalized);

    auto token_range = [&](const Entity& e) -> std::pair<std::size_t, std::size_t> {
        std::size_t first = tokens.size(), last = 0;
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            if (tokens[i].end <= e.begin) continue;
            if (tokens[i].begin >= e.end) break;
            first = std::min(first, i);
            last = i + 1;
        }
        if (first == tokens.size()) return {0, 0};
        return {first, last};
    };

    // Anchors: DOSE entities (except max-dose context); STRENGTH entities
    // stand in when no dose is present ("boire 10 ml...").
    std::vector<Spanned> anchors;
    std::vector<Spanned> attachments;
    for (const auto& e : entities) {
        auto [tb, te] = token_range(e);
        bool is_max_dose = e.type == EntityType::DOSE &&
                           attr_string(e, "role").value_or("") == "max_dose";
        if (e.type == EntityType::DOSE && !is_max_dose) {
            anchors.push_back({&e, tb, te});
        } else {
            attachments.push_back({&e, tb, te});
        }
    }
    if (anchors.empty()) {
        // Promote strengths to anchors; drop them from attachments.
        std::vector<Spanned> rest;
        for (auto& a : attachments) {
            if (a.entity->type == EntityType::STRENGTH)
                anchors.push_back(a);
            else
                rest.push_back(a);
        }
        attachments = std::move(rest);
    }
    if (anchors.empty()) {
        result.warnings.push_back("unstructurable: no dose entity to anchor a record");
        return result;
    }

    // Attach every cue to the nearest anchor (token distance, ties leftward).
    std::vector<std::vector<const Spanned*>> attached(anchors.size());
    for (const auto& att : attachments) {
        switch (att.entity->type) {
            case EntityType::DRUG:
            case EntityType::FORM:
            case EntityType::STRENGTH:
                continue;  // context only; no record field
            default:
                break;
        }
        std::size_t best = 0;
        std::size_t best_distance = SIZE_MAX;
        for (std::size_t a = 0; a < anchors.size(); ++a) {
            std::size_t d;
            if (anchors[a].token_begin >= att.token_end)
                d = anchors[a].token_begin - att.token_end;
            else if (att.token_begin >= anchors[a].token_end)
                d = att.token_begin - anchors[a].token_end;
            else
                d = 0;
            if (d < best_distance) {
                best_distance = d;
                best = a;
            }
        }
        if (best_distance > static_cast<std::size_t>(rules_.attach_window())) {
            result.warnings.push_back("dropped '" + att.entity->surface +
                                      "': no anchor within the attachment window");
            continue;
        }
        attached[best].push_back(&att);
    }

    // Build one record per anchor.
    for (std::size_t a = 0; a < anchors.size(); ++a) {
        PosologyStructure record;
        const Entity& anchor = *anchors[a].entity;
        record.designation = anchor.surface;

        QuantityAndRate quantity;
        quantity.value = attr_decimal(anchor, "value", Decimal(1));
        if (auto mx = attr_decimal_opt(anchor, "max_value")) quantity.max_value = *mx;
        if (auto unit = attr_string(anchor, "unit_token")) quantity.unit = *unit;
        if (auto code = attr_string(anchor, "code")) quantity.code = *code;
        record.quantity_and_rate = std::move(quantity);

        bool has_frequency = false, has_period = false, has_bounds = false;
        bool has_reason = false, has_repeats = false, has_maxdose = false;
        std::vector<const Spanned*> whens;
        std::vector<const Spanned*> tods;
        std::vector<std::string> dow_days;

        auto warn_duplicate = [&](const char* what, const Entity& e) {
            result.warnings.push_back(std::string("contradictory ") + what + " near '" +
                                      e.surface + "': kept the nearer attachment");
        };

        // Nearest-first processing so that duplicate cues resolve to the
        // closer one.
        std::vector<const Spanned*> ordered = attached[a];
        std::stable_sort(ordered.begin(), ordered.end(),
                         [&](const Spanned* lhs, const Spanned* rhs) {
                             auto dist = [&](const Spanned* s) {
                                 if (anchors[a].token_begin >= s->token_end)
                                     return anchors[a].token_begin - s->token_end;
                                 if (s->token_begin >= anchors[a].token_end)
                                     return s->token_begin - anchors[a].token_end;
                                 return std::size_t{0};
                             };
                             return dist(lhs) < dist(rhs);
                         });

        for (const Spanned* att : ordered) {
            const Entity& e = *att->entity;
            switch (e.type) {
                case EntityType::FREQUENCY: {
                    if (has_frequency) { warn_duplicate("FREQUENCY", e); break; }
                    auto count = attr_decimal(e, "count", Decimal(1));
                    record.timing.frequency = count.is_integral() ? count.integral_value() : 1;
                    if (auto mx = attr_decimal_opt(e, "max"))
                        if (mx->is_integral()) record.timing.frequency_max = mx->integral_value();
                    has_frequency = true;
                    break;
                }
                case EntityType::PERIOD: {
                    if (has_period) { warn_duplicate("PERIOD", e); break; }
                    auto value = attr_decimal(e, "value", Decimal(1));
                    auto unit = parse_period_unit(attr_string(e, "unit").value_or("day"));
                    if (value.is_integral() && unit) {
                        record.timing.period = value.integral_value();
                        record.timing.period_unit = *unit;
                        has_period = true;
                    }
                    break;
                }
                case EntityType::BOUNDS: {
                    if (has_bounds) { warn_duplicate("BOUNDS", e); break; }
                    if (auto start = attr_string(e, "start_date")) {
                        BoundsPeriod bp;
                        bp.start_date = *start;
                        bp.end_date = attr_string(e, "end_date").value_or(*start);
                        record.timing.bounds_period = std::move(bp);
                        has_bounds = true;
                    } else if (auto unit = parse_period_unit(attr_string(e, "unit").value_or(""))) {
                        BoundsDuration bd;
                        bd.value = attr_decimal(e, "value", Decimal(1));
                        if (auto mx = attr_decimal_opt(e, "max_value")) bd.max_value = *mx;
                        bd.unit = *unit;
                        record.timing.bounds_duration = std::move(bd);
                        has_bounds = true;
                    }
                    break;
                }
                case EntityType::REASON: {
                    if (has_reason) { warn_duplicate("REASON", e); break; }
                    AsNeeded an;
                    an.as_needed = true;
                    an.as_needed_for = attr_string(e, "condition").value_or(e.surface);
                    record.as_needed = std::move(an);
                    has_reason = true;
                    break;
                }
                case EntityType::NUMBER_REPEATS: {
                    if (has_repeats) { warn_duplicate("NUMBER_REPEATS", e); break; }
                    auto count = attr_decimal(e, "count", Decimal(1));
                    if (count.is_integral())
                        record.timing.number_repeats_allowed = count.integral_value();
                    has_repeats = true;
                    break;
                }
                case EntityType::DOSE: {  // role=max_dose
                    if (has_maxdose) { warn_duplicate("max dose", e); break; }
                    MaxDose md;
                    auto value = attr_decimal(e, "value", Decimal(1));
                    if (!value.is_integral() || value.integral_value() <= 0) break;
                    md.dose = value.integral_value();
                    if (auto unit = attr_string(e, "unit_token")) md.dose_unit = *unit;
                    record.max_dose_per_period = std::move(md);
                    has_maxdose = true;
                    break;
                }
                case EntityType::WHEN: {
                    if (e.attributes.contains("days")) {
                        for (const auto& d : e.attributes.at("days"))
                            dow_days.push_back(d.get<std::string>());
                    } else {
                        whens.push_back(att);
                    }
                    break;
                }
                case EntityType::TIME_OF_DAY:
                    tods.push_back(att);
                    break;
                default:
                    break;
            }
        }

        // WHEN processing: text order, adjacent-pair merges (MORN + AC →
        // ACM), then conjunction grouping for the frequency default.
        std::sort(whens.begin(), whens.end(), [](const Spanned* x, const Spanned* y) {
            return x->entity->begin < y->entity->begin;
        });
        struct WhenCue {
            std::string code;
            std::optional<std::string> offset;
            std::size_t token_begin, token_end;
            std::size_t norm_begin, norm_end;
        };
        std::vector<WhenCue> cues;
        for (const Spanned* w : whens) {
            WhenCue cue;
            cue.code = attr_string(*w->entity, "code").value_or("");
            if (auto off = attr_string(*w->entity, "offset")) cue.offset = *off;
            cue.token_begin = w->token_begin;
            cue.token_end = w->token_end;
            cue.norm_begin = w->entity->begin;
            cue.norm_end = w->entity->end;
            if (!cue.code.empty()) cues.push_back(std::move(cue));
        }
        for (std::size_t i = 0; i + 1 < cues.size();) {
            bool adjacent = cues[i + 1].token_begin <= cues[i].token_end + 1;
            auto merged = rules_.merge(cues[i].code, cues[i + 1].code);
            if (adjacent && merged) {
                cues[i].code = *merged;
                if (!cues[i].offset) cues[i].offset = cues[i + 1].offset;
                cues[i].token_end = cues[i + 1].token_end;
                cues[i].norm_end = cues[i + 1].norm_end;
                cues.erase(cues.begin() + i + 1);
            } else {
                ++i;
            }
        }
        int when_groups = cues.empty() ? 0 : 1;
        for (std::size_t i = 0; i + 1 < cues.size(); ++i) {
            bool alternative = false;
            for (const Token* t :
                 gap_tokens(tokens, cues[i].norm_end, cues[i + 1].norm_begin)) {
                if (rules_.conjunction(t->folded) == ComposeRules::Conj::alternative)
                    alternative = true;
            }
            if (!alternative) ++when_groups;
        }

        std::vector<std::string> when_codes;
        std::optional<std::string> when_offset;
        for (const auto& cue : cues) {
            when_codes.push_back(cue.code);
            if (cue.offset && !when_offset) when_offset = cue.offset;
        }

        // time_of_day grouping mirrors WHEN grouping.
        std::sort(tods.begin(), tods.end(), [](const Spanned* x, const Spanned* y) {
            return x->entity->begin < y->entity->begin;
        });
        int tod_count = tods.empty() ? 0 : 1;
        for (std::size_t i = 0; i + 1 < tods.size(); ++i) {
            bool alternative = false;
            for (const Token* t :
                 gap_tokens(tokens, tods[i]->entity->end, tods[i + 1]->entity->begin)) {
                if (rules_.conjunction(t->folded) == ComposeRules::Conj::alternative)
                    alternative = true;
            }
            if (!alternative) ++tod_count;
        }
        std::vector<std::string> tod_times;
        for (const Spanned* t : tods)
            if (auto time = attr_string(*t->entity, "time")) tod_times.push_back(*time);

        // The schema forbids when and time_of_day together; clock times are
        // the more precise cue.
        if (!tod_times.empty() && !when_codes.empty()) {
            result.warnings.push_back("when codes dropped in favor of time_of_day for '" +
                                      record.designation + "'");
            when_codes.clear();
            when_groups = 0;
        }

        if (!when_codes.empty()) record.timing.when = when_codes;
        if (!tod_times.empty()) record.timing.time_of_day = tod_times;
        if (!dow_days.empty()) {
            std::vector<DayOfWeek> days;
            for (const auto& d : dow_days)
                if (auto day = parse_day_of_week(d)) days.push_back(*day);
            if (!days.empty()) record.timing.day_of_week = std::move(days);
        }
        if (when_offset) record.timing.offset = when_offset;

        // Timing defaults from the rule file.
        std::set<std::string> cues_present = {"dose"};
        if (when_groups > 0) cues_present.insert("when");
        if (!dow_days.empty()) cues_present.insert("dow");
        if (tod_count > 0) cues_present.insert("tod");
        if (has_frequency) cues_present.insert("frequency");
        if (has_period) cues_present.insert("period");
        if (has_bounds) cues_present.insert("bounds");
        if (has_reason) cues_present.insert("reason");
        if (has_repeats) cues_present.insert("repeats");
        if (has_maxdose) cues_present.insert("maxdose");

        bool frequency_set = has_frequency;
        bool period_set = has_period;
        for (const auto& rule : rules_.default_rules()) {
            bool applies = true;
            for (const auto& group : rule.has) {
                bool any = false;
                for (const auto& cue : group) any = any || cues_present.count(cue) > 0;
                if (!any) { applies = false; break; }
            }
            for (const auto& cue : rule.lacks)
                if (cues_present.count(cue)) applies = false;
            if (!applies) continue;
            for (const auto& [field, value] : rule.effects) {
                if (field == "frequency" && !frequency_set) {
                    if (value == "when_groups")
                        record.timing.frequency = std::max(1, when_groups);
                    else if (value == "tod_count")
                        record.timing.frequency = std::max(1, tod_count);
                    else
                        record.timing.frequency = std::stoll(value);
                    frequency_set = true;
                } else if (field == "period" && !period_set) {
                    record.timing.period = std::stoll(value);
                } else if (field == "period_unit" && !period_set) {
                    if (auto unit = parse_period_unit(value)) record.timing.period_unit = *unit;
                }
            }
        }

        try {
            result.records.push_back(canonicalize(record));
        } catch (const ValidationError& err) {
            result.warnings.push_back("record dropped ('" + record.designation +
                                      "'): " + err.what());
        }
    }

    // Sequence numbers order multi-instruction queries.
    if (result.records.size() > 1) {
        for (std::size_t i = 0; i < result.records.size(); ++i) {
            result.records[i].timing.sequence = static_cast<std::int64_t>(i) + 1;
            result.records[i] = canonicalize(result.records[i]);
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// when_code
// ---------------------------------------------------------------------------

WhenCodeResult when_code(const std::string& phrase, const Normalizer& normalizer,
                         const Recognizer& recognizer, const ComposeRules& rules) {
    NormalizedText norm = normalizer.normalize(phrase);
    auto entities = recognizer.recognize(norm);

    std::vector<std::pair<std::string, std::optional<std::string>>> cues;
    for (const auto& e : entities) {
        if (e.type != EntityType::WHEN) continue;
        if (e.attributes.contains("days")) continue;
        auto code = e.attributes.contains("code")
                        ? e.attributes.at("code").get<std::string>()
                        : std::string{};
        std::optional<std::string> offset;
        if (e.attributes.contains("offset")) offset = e.attributes.at("offset").get<std::string>();
        if (!code.empty()) cues.emplace_back(code, offset);
    }
    if (cues.empty()) throw UnmappedWhenPhrase("unmapped when-phrase: '" + phrase + "'");

    // Merge adjacent cues (day-part + meal-relative) exactly like compose().
    while (cues.size() > 1) {
        auto merged = rules.merge(cues[0].first, cues[1].first);
        if (!merged) break;
        cues[0].first = *merged;
        if (!cues[0].second) cues[0].second = cues[1].second;
        cues.erase(cues.begin() + 1);
    }
    if (cues.size() != 1)
        throw UnmappedWhenPhrase("ambiguous when-phrase: '" + phrase + "'");
    return {cues[0].first, cues[0].second};
}

}  // namespace posodose
