#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace posodose {

/// Exact decimal number (mantissa / 10^scale), normalized so that the
/// mantissa carries no trailing zeros. Used for dose and duration values
/// so that equality checks are not at the mercy of binary floats.
class Decimal {
public:
    Decimal() = default;
    explicit Decimal(std::int64_t integral) : mantissa_(integral), scale_(0) {}

    static Decimal parse(std::string_view text);
    static std::optional<Decimal> try_parse(std::string_view text);

    std::string to_string() const;
    double to_double() const;

    std::int64_t mantissa() const { return mantissa_; }
    std::int32_t scale() const { return scale_; }
    bool is_integral() const { return scale_ == 0; }
    /// Integral value; valid only when is_integral().
    std::int64_t integral_value() const { return mantissa_; }

    bool operator==(const Decimal& other) const = default;
    bool operator<(const Decimal& other) const;
    bool operator<=(const Decimal& other) const { return *this < other || *this == other; }
    bool operator>(const Decimal& other) const { return other < *this; }
    bool operator>=(const Decimal& other) const { return other <= *this; }

    Decimal operator*(std::int64_t factor) const;
    Decimal operator+(const Decimal& other) const;

private:
    void normalize();

    std::int64_t mantissa_ = 0;
    std::int32_t scale_ = 0;  // count of decimal places, >= 0
};

// ---------------------------------------------------------------------------
// UTF-8 helpers for French text
// ---------------------------------------------------------------------------

/// Lowercase a UTF-8 string; covers ASCII plus the Latin-1 accented range
/// used in French (À→à ... Þ, Œ→œ). Other code points pass through.
std::string utf8_lower(std::string_view text);

/// Strip diacritics for matching purposes: é→e, à→a, ç→c, œ→oe, etc.
/// Output is plain ASCII for French input. Also lowercases.
std::string fold_accents(std::string_view text);

/// Collapse runs of whitespace to single spaces and trim the ends.
std::string collapse_whitespace(std::string_view text);

/// Levenshtein distance with an early-out bound.
std::size_t edit_distance(std::string_view a, std::string_view b,
                          std::size_t max_interesting = SIZE_MAX);

// ---------------------------------------------------------------------------
// Tokenizer over normalized text
// ---------------------------------------------------------------------------

enum class TokenKind { Word, Number, Clock, Date };

struct Token {
    std::string surface;             // substring of the normalized text
    std::string folded;              // accent-folded lowercase form
    std::size_t begin = 0;           // byte offsets into the tokenized string
    std::size_t end = 0;
    TokenKind kind = TokenKind::Word;
    std::optional<Decimal> number;   // for Number tokens
    std::optional<std::string> clock;  // "HH:MM:SS" for Clock tokens
    std::optional<std::string> date;   // "YYYY/MM/DD" for Date tokens
};

/// Split text into word / number / clock / date tokens. Letter-digit
/// boundaries split ("2cp" → "2", "cp") except inside clock and date forms.
std::vector<Token> tokenize(std::string_view text);

/// Parse a clock surface form ("08h", "8h30", "20:00", "20:00:30") into
/// "HH:MM:SS"; nullopt when not a clock form or out of range.
std::optional<std::string> parse_clock(std::string_view token);

/// Parse "DD/MM/YYYY" (French order) or "YYYY/MM/DD" into "YYYY/MM/DD".
std::optional<std::string> parse_date(std::string_view token);

}  // namespace posodose
