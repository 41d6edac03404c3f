#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "posodose/textutil.hpp"

namespace posodose {

// Closed vocabularies ---------------------------------------------------------

enum class PeriodUnit { hours, day, week, month };
enum class DayOfWeek { mon, tue, wed, thu, fri, sat, sun };

std::string to_string(PeriodUnit unit);
std::optional<PeriodUnit> parse_period_unit(std::string_view text);

std::string to_string(DayOfWeek day);
std::optional<DayOfWeek> parse_day_of_week(std::string_view text);

/// Position of a code in the FHIR R4 event-timing value set; nullopt for
/// codes outside the set. The position doubles as the canonical sort key.
std::optional<int> when_code_order(std::string_view code);

/// Canonical dose-unit label for a surface token ("cp" → "comprimé(s)").
/// Lookup is accent- and case-insensitive; unknown tokens pass through.
std::string canonical_unit_label(std::string_view token);

// Record types (one per posology instruction) ---------------------------------

struct AsNeeded {
    bool as_needed = false;
    std::string as_needed_for;

    bool operator==(const AsNeeded&) const = default;
};

struct QuantityAndRate {
    Decimal value;
    std::optional<Decimal> max_value;
    std::optional<std::string> unit;
    std::optional<std::string> code;  // terminology (SNOMED CT) code

    bool operator==(const QuantityAndRate&) const = default;
};

struct MaxDose {
    std::int64_t dose = 0;
    std::optional<std::string> dose_unit;
    std::optional<std::string> code;

    bool operator==(const MaxDose&) const = default;
};

struct BoundsDuration {
    Decimal value;
    std::optional<Decimal> max_value;
    PeriodUnit unit = PeriodUnit::day;

    bool operator==(const BoundsDuration&) const = default;
};

struct BoundsPeriod {
    std::string start_date;  // YYYY/MM/DD
    std::string end_date;    // YYYY/MM/DD

    bool operator==(const BoundsPeriod&) const = default;
};

struct Timing {
    std::optional<BoundsDuration> bounds_duration;
    std::optional<BoundsPeriod> bounds_period;
    std::optional<std::vector<DayOfWeek>> day_of_week;
    std::int64_t frequency = 1;
    std::optional<std::int64_t> frequency_max;
    std::optional<std::int64_t> number_repeats_allowed;
    std::optional<std::string> offset;
    std::int64_t period = 1;
    PeriodUnit period_unit = PeriodUnit::day;
    std::optional<std::int64_t> sequence;
    std::optional<std::vector<std::string>> time_of_day;  // HH:MM:SS
    std::optional<std::vector<std::string>> when;         // FHIR event-timing codes

    bool operator==(const Timing&) const = default;
};

struct PosologyStructure {
    std::string designation;
    std::optional<AsNeeded> as_needed;
    std::optional<QuantityAndRate> quantity_and_rate;
    std::optional<MaxDose> max_dose_per_period;
    Timing timing;

    bool operator==(const PosologyStructure&) const = default;
};

// Operations ------------------------------------------------------------------

struct Violation {
    std::string field;
    std::string rule;
};

/// Check every structural invariant; an empty list means the record is valid.
std::vector<Violation> validate(const PosologyStructure& record);

class ValidationError : public std::runtime_error {
public:
    ValidationError(std::string what, std::vector<Violation> violations)
        : std::runtime_error(std::move(what)), violations(std::move(violations)) {}
    std::vector<Violation> violations;
};

/// Deterministic normal form: canonical unit labels, sorted code lists,
/// trimmed text fields, YYYY/MM/DD dates. Throws ValidationError when the
/// input does not validate.
PosologyStructure canonicalize(const PosologyStructure& record);

class SchemaError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Canonical JSON text for one record / a list of records.
std::string serialize(const PosologyStructure& record);
std::string serialize(const std::vector<PosologyStructure>& records);

/// Strict parse: unknown keys, unknown enum values and invariant breaches
/// all raise SchemaError.
PosologyStructure deserialize(const std::string& text);
std::vector<PosologyStructure> deserialize_list(const std::string& text);

// nlohmann-json interop (strict in from_json)
void to_json(nlohmann::json& j, const PosologyStructure& record);
void from_json(const nlohmann::json& j, PosologyStructure& record);

}  // namespace posodose
