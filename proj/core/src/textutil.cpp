#include "posodose/textutil.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>

namespace posodose {

// ---------------------------------------------------------------------------
// Decimal
// ---------------------------------------------------------------------------

void Decimal::normalize() {
    if (mantissa_ == 0) {
        scale_ = 0;
        return;
    }
    while (scale_ > 0 && mantissa_ % 10 == 0) {
        mantissa_ /= 10;
        --scale_;
    }
}

std::optional<Decimal> Decimal::try_parse(std::string_view text) {
    if (text.empty()) return std::nullopt;
    bool negative = false;
    std::size_t i = 0;
    if (text[0] == '-' || text[0] == '+') {
        negative = text[0] == '-';
        i = 1;
    }
    std::int64_t mant = 0;
    std::int32_t scale = 0;
    bool seen_digit = false;
    bool seen_dot = false;
    for (; i < text.size(); ++i) {
        char c = text[i];
        if (c >= '0' && c <= '9') {
            if (mant > (INT64_MAX - 9) / 10) return std::nullopt;  // overflow
            mant = mant * 10 + (c - '0');
            if (seen_dot) ++scale;
            seen_digit = true;
        } else if ((c == '.' || c == ',') && !seen_dot) {
            seen_dot = true;
        } else {
            return std::nullopt;
        }
    }
    if (!seen_digit) return std::nullopt;
    Decimal d;
    d.mantissa_ = negative ? -mant : mant;
    d.scale_ = scale;
    d.normalize();
    return d;
}

Decimal Decimal::parse(std::string_view text) {
    auto d = try_parse(text);
    if (!d) throw std::invalid_argument("not a decimal: '" + std::string(text) + "'");
    return *d;
}

std::string Decimal::to_string() const {
    std::string digits = std::to_string(mantissa_ < 0 ? -mantissa_ : mantissa_);
    std::string out = mantissa_ < 0 ? "-" : "";
    if (scale_ == 0) return out + digits;
    if (static_cast<std::int32_t>(digits.size()) <= scale_) {
        out += "0.";
        out.append(scale_ - digits.size(), '0');
        out += digits;
    } else {
        out += digits.substr(0, digits.size() - scale_);
        out += '.';
        out += digits.substr(digits.size() - scale_);
    }
    return out;
}

double Decimal::to_double() const {
    return static_cast<double>(mantissa_) / std::pow(10.0, scale_);
}

bool Decimal::operator<(const Decimal& other) const {
    // Cross-scale compare without losing precision.
    __int128 lhs = static_cast<__int128>(mantissa_);
    __int128 rhs = static_cast<__int128>(other.mantissa_);
    for (std::int32_t s = scale_; s < other.scale_; ++s) lhs *= 10;
    for (std::int32_t s = other.scale_; s < scale_; ++s) rhs *= 10;
    return lhs < rhs;
}

Decimal Decimal::operator*(std::int64_t factor) const {
    Decimal d;
    d.mantissa_ = mantissa_ * factor;
    d.scale_ = scale_;
    d.normalize();
    return d;
}

Decimal Decimal::operator+(const Decimal& other) const {
    Decimal d;
    std::int64_t lhs = mantissa_;
    std::int64_t rhs = other.mantissa_;
    std::int32_t scale = std::max(scale_, other.scale_);
    for (std::int32_t s = scale_; s < scale; ++s) lhs *= 10;
    for (std::int32_t s = other.scale_; s < scale; ++s) rhs *= 10;
    d.mantissa_ = lhs + rhs;
    d.scale_ = scale;
    d.normalize();
    return d;
}

// ---------------------------------------------------------------------------
// UTF-8 case and accent folding
// ---------------------------------------------------------------------------

namespace {

// Decode one UTF-8 code point; returns the code point and advances i.
// Invalid bytes are returned as-is (latin-1 fallback keeps us total).
char32_t decode_utf8(std::string_view s, std::size_t& i) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    if (c < 0x80) {
        ++i;
        return c;
    }
    char32_t cp = 0;
    int extra = 0;
    if ((c & 0xE0) == 0xC0) {
        cp = c & 0x1F;
        extra = 1;
    } else if ((c & 0xF0) == 0xE0) {
        cp = c & 0x0F;
        extra = 2;
    } else if ((c & 0xF8) == 0xF0) {
        cp = c & 0x07;
        extra = 3;
    } else {
        ++i;
        return c;
    }
    if (i + extra >= s.size() + 1 || i + extra > s.size()) {
        ++i;
        return c;
    }
    std::size_t j = i + 1;
    for (int k = 0; k < extra; ++k, ++j) {
        unsigned char cc = static_cast<unsigned char>(s[j]);
        if ((cc & 0xC0) != 0x80) {
            ++i;
            return c;
        }
        cp = (cp << 6) | (cc & 0x3F);
    }
    i = j;
    return cp;
}

void encode_utf8(char32_t cp, std::string& out) {
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

char32_t lower_cp(char32_t cp) {
    if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
    // Latin-1 supplement capitals À..Þ except ×
    if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;
    if (cp == 0x152) return 0x153;  // Œ → œ
    if (cp == 0x178) return 0xFF;   // Ÿ → ÿ
    return cp;
}

// Diacritic strip for the French repertoire; returns ASCII replacement.
const char* strip_cp(char32_t cp) {
    switch (cp) {
        case 0xE0: case 0xE1: case 0xE2: case 0xE3: case 0xE4: case 0xE5: return "a";
        case 0xE7: return "c";
        case 0xE8: case 0xE9: case 0xEA: case 0xEB: return "e";
        case 0xEC: case 0xED: case 0xEE: case 0xEF: return "i";
        case 0xF1: return "n";
        case 0xF2: case 0xF3: case 0xF4: case 0xF5: case 0xF6: return "o";
        case 0xF9: case 0xFA: case 0xFB: case 0xFC: return "u";
        case 0xFD: case 0xFF: return "y";
        case 0x153: return "oe";
        case 0xE6: return "ae";
        default: return nullptr;
    }
}

}  // namespace

std::string utf8_lower(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        char32_t cp = decode_utf8(text, i);
        encode_utf8(lower_cp(cp), out);
    }
    return out;
}

std::string fold_accents(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        char32_t cp = lower_cp(decode_utf8(text, i));
        if (const char* rep = strip_cp(cp)) {
            out += rep;
        } else if (cp < 0x80) {
            out += static_cast<char>(cp);
        } else {
            encode_utf8(cp, out);
        }
    }
    return out;
}

std::string collapse_whitespace(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char c : text) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            pending_space = !out.empty();
        } else {
            if (pending_space) out += ' ';
            pending_space = false;
            out += c;
        }
    }
    return out;
}

std::size_t edit_distance(std::string_view a, std::string_view b,
                          std::size_t max_interesting) {
    if (a.size() > b.size()) std::swap(a, b);
    if (b.size() - a.size() > max_interesting) return max_interesting + 1;
    std::vector<std::size_t> row(a.size() + 1);
    for (std::size_t j = 0; j <= a.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= b.size(); ++i) {
        std::size_t prev_diag = row[0];
        row[0] = i;
        std::size_t row_min = row[0];
        for (std::size_t j = 1; j <= a.size(); ++j) {
            std::size_t cost = (a[j - 1] == b[i - 1]) ? 0 : 1;
            std::size_t next = std::min({row[j] + 1, row[j - 1] + 1, prev_diag + cost});
            prev_diag = row[j];
            row[j] = next;
            row_min = std::min(row_min, next);
        }
        if (row_min > max_interesting) return max_interesting + 1;
    }
    return row[a.size()];
}

// ---------------------------------------------------------------------------
// Tokenizer
// ---------------------------------------------------------------------------

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool is_letter_start(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0xC0;
}

bool is_continuation(unsigned char c) { return (c & 0xC0) == 0x80; }

int to_int(std::string_view s) {
    int v = 0;
    for (char c : s) v = v * 10 + (c - '0');
    return v;
}

std::string pad2(int v) {
    std::string s = std::to_string(v);
    return s.size() < 2 ? "0" + s : s;
}

}  // namespace

std::optional<std::string> parse_clock(std::string_view token) {
    // Accepted: "8h", "08h", "8h30", "20:00", "20:00:30"
    std::size_t i = 0;
    while (i < token.size() && is_digit(token[i])) ++i;
    if (i == 0 || i > 2) return std::nullopt;
    int hours = to_int(token.substr(0, i));
    int minutes = 0, seconds = 0;
    if (i == token.size()) return std::nullopt;
    char sep = token[i];
    if (sep != 'h' && sep != 'H' && sep != ':') return std::nullopt;
    std::size_t j = i + 1;
    std::size_t m0 = j;
    while (j < token.size() && is_digit(token[j])) ++j;
    if (j > m0) {
        if (j - m0 != 2) return std::nullopt;
        minutes = to_int(token.substr(m0, 2));
    } else if (sep == ':') {
        return std::nullopt;  // "20:" is not a clock
    }
    if (j < token.size()) {
        if (token[j] != ':' || sep == 'h') return std::nullopt;
        std::size_t s0 = j + 1;
        std::size_t k = s0;
        while (k < token.size() && is_digit(token[k])) ++k;
        if (k - s0 != 2 || k != token.size()) return std::nullopt;
        seconds = to_int(token.substr(s0, 2));
    }
    if (hours > 23 || minutes > 59 || seconds > 59) return std::nullopt;
    return pad2(hours) + ":" + pad2(minutes) + ":" + pad2(seconds);
}

std::optional<std::string> parse_date(std::string_view token) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= token.size(); ++i) {
        if (i == token.size() || token[i] == '/') {
            parts.push_back(token.substr(start, i - start));
            start = i + 1;
        }
    }
    if (parts.size() != 3) return std::nullopt;
    for (auto p : parts) {
        if (p.empty() || !std::all_of(p.begin(), p.end(), is_digit)) return std::nullopt;
    }
    int a = to_int(parts[0]), b = to_int(parts[1]), c = to_int(parts[2]);
    int year, month, day;
    if (parts[0].size() == 4) {             // YYYY/MM/DD
        year = a; month = b; day = c;
    } else if (parts[2].size() == 4) {      // DD/MM/YYYY (French order)
        day = a; month = b; year = c;
    } else {
        return std::nullopt;
    }
    if (month < 1 || month > 12 || day < 1 || day > 31 || year < 1000) return std::nullopt;
    return std::to_string(year) + "/" + pad2(month) + "/" + pad2(day);
}

std::vector<Token> tokenize(std::string_view text) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    auto push = [&](std::size_t begin, std::size_t end, TokenKind kind) {
        Token t;
        t.surface = std::string(text.substr(begin, end - begin));
        t.folded = fold_accents(t.surface);
        t.begin = begin;
        t.end = end;
        t.kind = kind;
        if (kind == TokenKind::Number) t.number = Decimal::try_parse(t.surface);
        if (kind == TokenKind::Clock) t.clock = parse_clock(t.surface);
        if (kind == TokenKind::Date) t.date = parse_date(t.surface);
        tokens.push_back(std::move(t));
    };

    while (i < text.size()) {
        unsigned char c = static_cast<unsigned char>(text[i]);
        if (is_digit(static_cast<char>(c))) {
            // Greedy scan of a digit-led token: date > clock > number.
            std::size_t j = i;
            while (j < text.size() &&
                   (is_digit(text[j]) || text[j] == '/' || text[j] == ':' ||
                    text[j] == '.' || text[j] == 'h' || text[j] == 'H')) {
                // 'h' only glues when it continues a clock form: digit before,
                // and (digit or boundary) after.
                if ((text[j] == 'h' || text[j] == 'H')) {
                    bool digit_before = j > i && is_digit(text[j - 1]);
                    bool ok_after = j + 1 >= text.size() || is_digit(text[j + 1]) ||
                                    !is_letter_start(static_cast<unsigned char>(text[j + 1]));
                    if (!digit_before || !ok_after) break;
                }
                ++j;
            }
            // Trim trailing separators that end a sentence ("jours." etc.)
            while (j > i && (text[j - 1] == '.' || text[j - 1] == ':' || text[j - 1] == '/'))
                --j;
            std::string_view tok = text.substr(i, j - i);
            if (parse_date(tok)) {
                push(i, j, TokenKind::Date);
            } else if (parse_clock(tok)) {
                push(i, j, TokenKind::Clock);
            } else {
                // Fall back: longest prefix that parses as a plain number.
                std::size_t k = i;
                while (k < j && is_digit(text[k])) ++k;
                if (k < j && text[k] == '.' && k + 1 < j && is_digit(text[k + 1])) {
                    ++k;
                    while (k < j && is_digit(text[k])) ++k;
                }
                push(i, k, TokenKind::Number);
                j = k;
            }
            i = j;
        } else if (is_letter_start(c)) {
            std::size_t j = i;
            while (j < text.size()) {
                unsigned char cj = static_cast<unsigned char>(text[j]);
                if (is_letter_start(cj) || is_continuation(cj)) {
                    ++j;
                } else {
                    break;
                }
            }
            push(i, j, TokenKind::Word);
            i = j;
        } else {
            ++i;  // separator / punctuation byte
        }
    }
    return tokens;
}

}  // namespace posodose
