#include "posodose/schema.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <regex>

namespace posodose {

namespace {

using nlohmann::json;

const std::array<std::pair<const char*, PeriodUnit>, 4> kPeriodUnits = {{
    {"hours", PeriodUnit::hours},
    {"day", PeriodUnit::day},
    {"week", PeriodUnit::week},
    {"month", PeriodUnit::month},
}};

const std::array<const char*, 7> kDays = {"mon", "tue", "wed", "thu", "fri", "sat", "sun"};

// FHIR R4 event-timing value set, in value-set order. The position is the
// canonical sort key for `when` lists.
const std::array<const char*, 26> kWhenCodes = {
    "MORN", "MORN.early", "MORN.late", "NOON", "AFT", "AFT.early", "AFT.late",
    "EVE",  "EVE.early",  "EVE.late",  "NIGHT", "PHS",
    "HS",   "WAKE",       "C",  "CM",  "CD",  "CV",
    "AC",   "ACM",        "ACD", "ACV", "PC", "PCM", "PCD", "PCV",
};

// Canonical dose-unit vocabulary, keyed by accent-folded lowercase surface.
const std::map<std::string, std::string>& unit_table() {
    static const std::map<std::string, std::string> table = {
        {"cp", "comprimé(s)"},         {"cps", "comprimé(s)"},
        {"cmp", "comprimé(s)"},        {"cpr", "comprimé(s)"},
        {"comprime", "comprimé(s)"},   {"comprimes", "comprimé(s)"},
        {"comprime(s)", "comprimé(s)"},
        {"amp", "ampoule(s)"},         {"ampoule", "ampoule(s)"},
        {"ampoules", "ampoule(s)"},    {"ampoule(s)", "ampoule(s)"},
        {"sach", "sachet(s)"},         {"sachet", "sachet(s)"},
        {"sachets", "sachet(s)"},      {"sachet(s)", "sachet(s)"},
        {"gelule", "gélule(s)"},       {"gelules", "gélule(s)"},
        {"gel", "gélule(s)"},          {"gelule(s)", "gélule(s)"},
        {"goutte", "goutte(s)"},       {"gouttes", "goutte(s)"},
        {"gtt", "goutte(s)"},          {"goutte(s)", "goutte(s)"},
        {"dose", "dose(s)"},           {"doses", "dose(s)"},
        {"dose(s)", "dose(s)"},
        {"suppositoire", "suppositoire(s)"},
        {"suppositoires", "suppositoire(s)"},
        {"suppositoire(s)", "suppositoire(s)"},
        {"bouffee", "bouffée(s)"},     {"bouffees", "bouffée(s)"},
        {"bouffee(s)", "bouffée(s)"},
        {"injection", "injection(s)"}, {"injections", "injection(s)"},
        {"injection(s)", "injection(s)"},
        {"application", "application(s)"},
        {"applications", "application(s)"},
        {"application(s)", "application(s)"},
        {"cuillere", "cuillère(s)"},   {"cuilleres", "cuillère(s)"},
        {"cuillere(s)", "cuillère(s)"},
        {"patch", "patch(s)"},         {"patchs", "patch(s)"},
        {"patch(s)", "patch(s)"},
    };
    return table;
}

const std::regex kClockRe("^([01][0-9]|2[0-3]):[0-5][0-9]:[0-5][0-9]$");
const std::regex kDateRe("^[0-9]{4}/(0[1-9]|1[0-2])/(0[1-9]|[12][0-9]|3[01])$");

std::string clean_text(std::string_view text) {
    return collapse_whitespace(text);
}

}  // namespace

std::string to_string(PeriodUnit unit) {
    for (const auto& [name, value] : kPeriodUnits)
        if (value == unit) return name;
    return "day";
}

std::optional<PeriodUnit> parse_period_unit(std::string_view text) {
    for (const auto& [name, value] : kPeriodUnits)
        if (text == name) return value;
    return std::nullopt;
}

std::string to_string(DayOfWeek day) {
    return kDays[static_cast<int>(day)];
}

std::optional<DayOfWeek> parse_day_of_week(std::string_view text) {
    for (std::size_t i = 0; i < kDays.size(); ++i)
        if (text == kDays[i]) return static_cast<DayOfWeek>(i);
    return std::nullopt;
}

std::optional<int> when_code_order(std::string_view code) {
    for (std::size_t i = 0; i < kWhenCodes.size(); ++i)
        if (code == kWhenCodes[i]) return static_cast<int>(i);
    return std::nullopt;
}

std::string canonical_unit_label(std::string_view token) {
    const auto& table = unit_table();
    auto it = table.find(fold_accents(token));
    if (it != table.end()) return it->second;
    return clean_text(utf8_lower(token));
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

std::vector<Violation> validate(const PosologyStructure& r) {
    std::vector<Violation> out;
    auto add = [&](std::string field, std::string rule) {
        out.push_back({std::move(field), std::move(rule)});
    };

    if (r.as_needed) {
        if (!r.as_needed->as_needed_for.empty() && !r.as_needed->as_needed) {
            add("as_needed.as_needed", "as_needed_for set but as_needed is false");
        }
    }
    if (r.quantity_and_rate) {
        const auto& q = *r.quantity_and_rate;
        if (q.value < Decimal(0)) add("quantity_and_rate.value", "value < 0");
        if (q.max_value && *q.max_value < q.value)
            add("quantity_and_rate.max_value", "max_value < value");
    }
    if (r.max_dose_per_period) {
        if (r.max_dose_per_period->dose <= 0)
            add("max_dose_per_period.dose", "dose must be > 0");
    }

    const Timing& t = r.timing;
    if (t.frequency < 1) add("timing.frequency", "frequency must be >= 1");
    if (t.frequency_max && *t.frequency_max < t.frequency)
        add("timing.frequency_max", "frequency_max < frequency");
    if (t.period < 1) add("timing.period", "period must be >= 1");
    if (t.number_repeats_allowed && *t.number_repeats_allowed < 0)
        add("timing.number_repeats_allowed", "negative repeat count");
    if (t.sequence && *t.sequence < 1) add("timing.sequence", "sequence must be >= 1");

    if (t.bounds_duration && t.bounds_period)
        add("timing.bounds_duration", "bounds_duration and bounds_period both present");
    if (t.bounds_duration) {
        const auto& b = *t.bounds_duration;
        if (!(Decimal(0) < b.value)) add("timing.bounds_duration.value", "value must be > 0");
        if (b.max_value && *b.max_value < b.value)
            add("timing.bounds_duration.max_value", "max_value < value");
    }
    if (t.bounds_period) {
        const auto& b = *t.bounds_period;
        if (!std::regex_match(b.start_date, kDateRe))
            add("timing.bounds_period.start_date", "not a YYYY/MM/DD date");
        if (!std::regex_match(b.end_date, kDateRe))
            add("timing.bounds_period.end_date", "not a YYYY/MM/DD date");
        if (std::regex_match(b.start_date, kDateRe) && std::regex_match(b.end_date, kDateRe) &&
            b.end_date < b.start_date)
            add("timing.bounds_period", "start_date after end_date");
    }

    bool has_tod = t.time_of_day && !t.time_of_day->empty();
    bool has_when = t.when && !t.when->empty();
    if (has_tod && has_when) add("timing.when", "when/time_of_day exclusivity");

    if (t.time_of_day) {
        if (t.time_of_day->empty()) add("timing.time_of_day", "present but empty");
        for (const auto& clock : *t.time_of_day)
            if (!std::regex_match(clock, kClockRe))
                add("timing.time_of_day", "not an HH:mm:ss clock time: '" + clock + "'");
    }
    if (t.when) {
        if (t.when->empty()) add("timing.when", "present but empty");
        for (const auto& code : *t.when)
            if (!when_code_order(code))
                add("timing.when", "unknown event-timing code: '" + code + "'");
    }
    if (t.day_of_week && t.day_of_week->empty()) add("timing.day_of_week", "present but empty");

    return out;
}

// ---------------------------------------------------------------------------
// canonicalize
// ---------------------------------------------------------------------------

PosologyStructure canonicalize(const PosologyStructure& record) {
    auto violations = validate(record);
    if (!violations.empty()) {
        std::string what = "record does not validate:";
        for (const auto& v : violations) what += " [" + v.field + ": " + v.rule + "]";
        throw ValidationError(what, std::move(violations));
    }

    PosologyStructure r = record;
    r.designation = clean_text(r.designation);

    if (r.as_needed) {
        r.as_needed->as_needed_for = clean_text(r.as_needed->as_needed_for);
        if (!r.as_needed->as_needed && r.as_needed->as_needed_for.empty())
            r.as_needed.reset();
    }
    if (r.quantity_and_rate && r.quantity_and_rate->unit)
        r.quantity_and_rate->unit = canonical_unit_label(*r.quantity_and_rate->unit);
    if (r.max_dose_per_period && r.max_dose_per_period->dose_unit)
        r.max_dose_per_period->dose_unit = canonical_unit_label(*r.max_dose_per_period->dose_unit);

    Timing& t = r.timing;
    if (t.offset) {
        t.offset = clean_text(*t.offset);
        if (t.offset->empty()) t.offset.reset();
    }
    if (t.day_of_week) {
        auto& days = *t.day_of_week;
        std::sort(days.begin(), days.end());
        days.erase(std::unique(days.begin(), days.end()), days.end());
        if (days.empty()) t.day_of_week.reset();
    }
    if (t.time_of_day) {
        auto& times = *t.time_of_day;
        std::sort(times.begin(), times.end());
        times.erase(std::unique(times.begin(), times.end()), times.end());
        if (times.empty()) t.time_of_day.reset();
    }
    if (t.when) {
        auto& codes = *t.when;
        std::sort(codes.begin(), codes.end(), [](const auto& a, const auto& b) {
            return when_code_order(a).value() < when_code_order(b).value();
        });
        codes.erase(std::unique(codes.begin(), codes.end()), codes.end());
        if (codes.empty()) t.when.reset();
    }
    if (t.bounds_period) {
        // Dates arriving in French day-first order are re-ordered upstream;
        // here both fields are already YYYY/MM/DD (validate guarantees it).
    }
    return r;
}

// ---------------------------------------------------------------------------
// JSON serialization
// ---------------------------------------------------------------------------

namespace {

// The released datasets spell the repeats field this way; keep it on the wire.
constexpr const char* kRepeatsKey = "number_repeats_allows";

json decimal_to_json(const Decimal& d) {
    if (d.is_integral()) return json(d.integral_value());
    return json(d.to_double());
}

Decimal decimal_from_json(const json& j, const std::string& path) {
    if (j.is_number_integer()) return Decimal(j.get<std::int64_t>());
    if (j.is_number_float()) {
        // Round-trip through the shortest text form so "0.5" stays 0.5 exactly.
        return Decimal::parse(j.dump());
    }
    if (j.is_string()) {
        if (auto d = Decimal::try_parse(j.get<std::string>())) return *d;
    }
    throw SchemaError(path + ": expected a decimal number");
}

std::int64_t int_from_json(const json& j, const std::string& path) {
    if (j.is_number_integer()) return j.get<std::int64_t>();
    if (j.is_number_float()) {
        double v = j.get<double>();
        auto r = static_cast<std::int64_t>(v);
        if (static_cast<double>(r) == v) return r;
    }
    throw SchemaError(path + ": expected an integer");
}

std::string string_from_json(const json& j, const std::string& path) {
    if (!j.is_string()) throw SchemaError(path + ": expected a string");
    return j.get<std::string>();
}

bool bool_from_json(const json& j, const std::string& path) {
    if (!j.is_boolean()) throw SchemaError(path + ": expected a boolean");
    return j.get<bool>();
}

void expect_keys(const json& j, std::initializer_list<const char*> keys,
                 const std::string& path) {
    if (!j.is_object()) throw SchemaError(path + ": expected an object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        bool known = false;
        for (const char* k : keys)
            if (key == k) { known = true; break; }
        if (!known) throw SchemaError(path + ": unknown field '" + key + "'");
    }
}

}  // namespace

void to_json(json& j, const PosologyStructure& r) {
    j = json::object();
    j["designation"] = r.designation;
    if (r.as_needed) {
        j["as_needed"] = {{"as_needed", r.as_needed->as_needed},
                          {"as_needed_for", r.as_needed->as_needed_for}};
    }
    if (r.quantity_and_rate) {
        const auto& q = *r.quantity_and_rate;
        json jq = {{"value", decimal_to_json(q.value)}};
        if (q.max_value) jq["max_value"] = decimal_to_json(*q.max_value);
        if (q.unit) jq["unit"] = *q.unit;
        if (q.code) jq["code"] = *q.code;
        j["quantity_and_rate"] = std::move(jq);
    }
    if (r.max_dose_per_period) {
        const auto& m = *r.max_dose_per_period;
        json jm = {{"dose", m.dose}};
        if (m.dose_unit) jm["dose_unit"] = *m.dose_unit;
        if (m.code) jm["code"] = *m.code;
        j["max_dose_per_period"] = std::move(jm);
    }

    const Timing& t = r.timing;
    json jt = json::object();
    if (t.bounds_duration) {
        const auto& b = *t.bounds_duration;
        json jb = {{"value", decimal_to_json(b.value)}, {"unit", to_string(b.unit)}};
        if (b.max_value) jb["max_value"] = decimal_to_json(*b.max_value);
        jt["bounds_duration"] = std::move(jb);
    }
    if (t.bounds_period) {
        jt["bounds_period"] = {{"start_date", t.bounds_period->start_date},
                               {"end_date", t.bounds_period->end_date}};
    }
    if (t.day_of_week) {
        json days = json::array();
        for (auto d : *t.day_of_week) days.push_back(to_string(d));
        jt["day_of_week"] = std::move(days);
    }
    jt["frequency"] = t.frequency;
    if (t.frequency_max) jt["frequency_max"] = *t.frequency_max;
    if (t.number_repeats_allowed) jt[kRepeatsKey] = *t.number_repeats_allowed;
    if (t.offset) jt["offset"] = *t.offset;
    jt["period"] = t.period;
    jt["period_unit"] = to_string(t.period_unit);
    if (t.sequence) jt["sequence"] = *t.sequence;
    if (t.time_of_day) jt["time_of_day"] = *t.time_of_day;
    if (t.when) jt["when"] = *t.when;
    j["timing"] = std::move(jt);
}

void from_json(const json& j, PosologyStructure& r) {
    expect_keys(j, {"designation", "as_needed", "quantity_and_rate",
                    "max_dose_per_period", "timing"}, "record");
    r = PosologyStructure{};
    if (!j.contains("designation")) throw SchemaError("record: missing 'designation'");
    r.designation = string_from_json(j.at("designation"), "designation");

    if (j.contains("as_needed") && !j.at("as_needed").is_null()) {
        const json& ja = j.at("as_needed");
        expect_keys(ja, {"as_needed", "as_needed_for"}, "as_needed");
        AsNeeded a;
        if (ja.contains("as_needed")) a.as_needed = bool_from_json(ja.at("as_needed"), "as_needed.as_needed");
        if (ja.contains("as_needed_for") && !ja.at("as_needed_for").is_null())
            a.as_needed_for = string_from_json(ja.at("as_needed_for"), "as_needed.as_needed_for");
        r.as_needed = std::move(a);
    }
    if (j.contains("quantity_and_rate") && !j.at("quantity_and_rate").is_null()) {
        const json& jq = j.at("quantity_and_rate");
        expect_keys(jq, {"value", "max_value", "unit", "code"}, "quantity_and_rate");
        QuantityAndRate q;
        if (!jq.contains("value")) throw SchemaError("quantity_and_rate: missing 'value'");
        q.value = decimal_from_json(jq.at("value"), "quantity_and_rate.value");
        if (jq.contains("max_value") && !jq.at("max_value").is_null())
            q.max_value = decimal_from_json(jq.at("max_value"), "quantity_and_rate.max_value");
        if (jq.contains("unit") && !jq.at("unit").is_null())
            q.unit = string_from_json(jq.at("unit"), "quantity_and_rate.unit");
        if (jq.contains("code") && !jq.at("code").is_null())
            q.code = string_from_json(jq.at("code"), "quantity_and_rate.code");
        r.quantity_and_rate = std::move(q);
    }
    if (j.contains("max_dose_per_period") && !j.at("max_dose_per_period").is_null()) {
        const json& jm = j.at("max_dose_per_period");
        expect_keys(jm, {"dose", "dose_unit", "code"}, "max_dose_per_period");
        MaxDose m;
        if (!jm.contains("dose")) throw SchemaError("max_dose_per_period: missing 'dose'");
        m.dose = int_from_json(jm.at("dose"), "max_dose_per_period.dose");
        if (jm.contains("dose_unit") && !jm.at("dose_unit").is_null())
            m.dose_unit = string_from_json(jm.at("dose_unit"), "max_dose_per_period.dose_unit");
        if (jm.contains("code") && !jm.at("code").is_null())
            m.code = string_from_json(jm.at("code"), "max_dose_per_period.code");
        r.max_dose_per_period = std::move(m);
    }

    if (!j.contains("timing")) throw SchemaError("record: missing 'timing'");
    const json& jt = j.at("timing");
    expect_keys(jt,
                {"bounds_duration", "bounds_period", "day_of_week", "frequency",
                 "frequency_max", kRepeatsKey, "offset", "period", "period_unit",
                 "sequence", "time_of_day", "when"},
                "timing");
    Timing& t = r.timing;
    if (jt.contains("bounds_duration") && !jt.at("bounds_duration").is_null()) {
        const json& jb = jt.at("bounds_duration");
        expect_keys(jb, {"value", "max_value", "unit"}, "timing.bounds_duration");
        BoundsDuration b;
        if (!jb.contains("value")) throw SchemaError("timing.bounds_duration: missing 'value'");
        b.value = decimal_from_json(jb.at("value"), "timing.bounds_duration.value");
        if (jb.contains("max_value") && !jb.at("max_value").is_null())
            b.max_value = decimal_from_json(jb.at("max_value"), "timing.bounds_duration.max_value");
        if (!jb.contains("unit")) throw SchemaError("timing.bounds_duration: missing 'unit'");
        auto unit = parse_period_unit(string_from_json(jb.at("unit"), "timing.bounds_duration.unit"));
        if (!unit)
            throw SchemaError("timing.bounds_duration.unit: unknown unit '" +
                              jb.at("unit").get<std::string>() + "'");
        b.unit = *unit;
        t.bounds_duration = std::move(b);
    }
    if (jt.contains("bounds_period") && !jt.at("bounds_period").is_null()) {
        const json& jb = jt.at("bounds_period");
        expect_keys(jb, {"start_date", "end_date"}, "timing.bounds_period");
        BoundsPeriod b;
        if (!jb.contains("start_date") || !jb.contains("end_date"))
            throw SchemaError("timing.bounds_period: missing start_date/end_date");
        b.start_date = string_from_json(jb.at("start_date"), "timing.bounds_period.start_date");
        b.end_date = string_from_json(jb.at("end_date"), "timing.bounds_period.end_date");
        t.bounds_period = std::move(b);
    }
    if (jt.contains("day_of_week") && !jt.at("day_of_week").is_null()) {
        if (!jt.at("day_of_week").is_array())
            throw SchemaError("timing.day_of_week: expected a list");
        std::vector<DayOfWeek> days;
        for (const auto& item : jt.at("day_of_week")) {
            auto d = parse_day_of_week(string_from_json(item, "timing.day_of_week[]"));
            if (!d)
                throw SchemaError("timing.day_of_week: unknown day '" +
                                  item.get<std::string>() + "'");
            days.push_back(*d);
        }
        t.day_of_week = std::move(days);
    }
    if (jt.contains("frequency")) t.frequency = int_from_json(jt.at("frequency"), "timing.frequency");
    if (jt.contains("frequency_max") && !jt.at("frequency_max").is_null())
        t.frequency_max = int_from_json(jt.at("frequency_max"), "timing.frequency_max");
    if (jt.contains(kRepeatsKey) && !jt.at(kRepeatsKey).is_null())
        t.number_repeats_allowed = int_from_json(jt.at(kRepeatsKey), std::string("timing.") + kRepeatsKey);
    if (jt.contains("offset") && !jt.at("offset").is_null())
        t.offset = string_from_json(jt.at("offset"), "timing.offset");
    if (jt.contains("period")) t.period = int_from_json(jt.at("period"), "timing.period");
    if (jt.contains("period_unit")) {
        auto unit = parse_period_unit(string_from_json(jt.at("period_unit"), "timing.period_unit"));
        if (!unit)
            throw SchemaError("timing.period_unit: unknown unit '" +
                              jt.at("period_unit").get<std::string>() + "'");
        t.period_unit = *unit;
    }
    if (jt.contains("sequence") && !jt.at("sequence").is_null())
        t.sequence = int_from_json(jt.at("sequence"), "timing.sequence");
    if (jt.contains("time_of_day") && !jt.at("time_of_day").is_null()) {
        if (!jt.at("time_of_day").is_array())
            throw SchemaError("timing.time_of_day: expected a list");
        std::vector<std::string> times;
        for (const auto& item : jt.at("time_of_day"))
            times.push_back(string_from_json(item, "timing.time_of_day[]"));
        t.time_of_day = std::move(times);
    }
    if (jt.contains("when") && !jt.at("when").is_null()) {
        if (!jt.at("when").is_array()) throw SchemaError("timing.when: expected a list");
        std::vector<std::string> codes;
        for (const auto& item : jt.at("when")) {
            auto code = string_from_json(item, "timing.when[]");
            if (!when_code_order(code))
                throw SchemaError("timing.when: unknown event-timing code '" + code + "'");
            codes.push_back(std::move(code));
        }
        t.when = std::move(codes);
    }
}

std::string serialize(const PosologyStructure& record) {
    json j = record;
    return j.dump();
}

std::string serialize(const std::vector<PosologyStructure>& records) {
    json j = json::array();
    for (const auto& r : records) j.push_back(r);
    return j.dump();
}

namespace {

PosologyStructure record_from_json(const json& j) {
    PosologyStructure r = j.get<PosologyStructure>();
    auto violations = validate(r);
    if (!violations.empty()) {
        std::string what = "record violates schema invariants:";
        for (const auto& v : violations) what += " [" + v.field + ": " + v.rule + "]";
        throw SchemaError(what);
    }
    return r;
}

}  // namespace

PosologyStructure deserialize(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("malformed document: ") + e.what());
    }
    return record_from_json(j);
}

std::vector<PosologyStructure> deserialize_list(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("malformed document: ") + e.what());
    }
    if (!j.is_array()) throw SchemaError("expected a JSON array of records");
    std::vector<PosologyStructure> out;
    for (const auto& item : j) out.push_back(record_from_json(item));
    return out;
}

}  // namespace posodose
