#include "posodose/normalizer.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "posodose/textutil.hpp"

namespace posodose {

std::pair<std::size_t, std::size_t> NormalizedText::raw_span(std::size_t norm_begin,
                                                             std::size_t norm_end) const {
    if (norm_begin >= map_begin.size() || norm_end == 0 || norm_end > map_end.size())
        return {0, 0};
    return {map_begin[norm_begin], map_end[norm_end - 1]};
}

// ---------------------------------------------------------------------------
// Lexicon
// ---------------------------------------------------------------------------

Lexicon Lexicon::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open lexicon file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return from_text(buffer.str());
}

Lexicon Lexicon::from_text(std::string_view text) {
    Lexicon lex;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line.front() == '#') continue;

        std::vector<std::string> cols;
        std::size_t start = 0;
        for (std::size_t i = 0; i <= line.size(); ++i) {
            if (i == line.size() || line[i] == '\t') {
                cols.emplace_back(line.substr(start, i - start));
                start = i + 1;
            }
        }
        if (cols.empty() || cols[0].empty()) continue;

        if (cols.size() == 1) {
            lex.vocabulary_.insert(fold_accents(cols[0]));
            continue;
        }
        Entry entry;
        entry.expansion = cols[1];
        entry.keep_token = cols.size() > 2 && cols[2] == "keep";
        lex.entries_[fold_accents(cols[0])] = entry;
        // Expansion words are protected from OCR repair; otherwise expanding
        // and re-normalizing would not be a fixed point.
        for (const auto& tok : tokenize(entry.expansion))
            lex.vocabulary_.insert(tok.folded);
    }
    return lex;
}

const Lexicon::Entry* Lexicon::find(std::string_view folded_token) const {
    auto it = entries_.find(std::string(folded_token));
    return it == entries_.end() ? nullptr : &it->second;
}

bool Lexicon::in_vocabulary(std::string_view folded_token) const {
    return vocabulary_.count(std::string(folded_token)) > 0 ||
           entries_.count(std::string(folded_token)) > 0;
}

// ---------------------------------------------------------------------------
// French number words
// ---------------------------------------------------------------------------

namespace {

int numeral_value(std::string_view folded) {
    static const std::map<std::string_view, int> table = {
        {"un", 1},     {"une", 1},     {"deux", 2},     {"trois", 3},
        {"quatre", 4}, {"cinq", 5},    {"six", 6},      {"sept", 7},
        {"huit", 8},   {"neuf", 9},    {"dix", 10},     {"onze", 11},
        {"douze", 12}, {"treize", 13}, {"quatorze", 14},{"quinze", 15},
        {"seize", 16}, {"vingt", 20},  {"trente", 30},  {"quarante", 40},
        {"cinquante", 50}, {"soixante", 60}, {"cent", 100},
    };
    auto it = table.find(folded);
    return it == table.end() ? -1 : it->second;
}

// Combine a run of French numeral words ("quatre vingt dix" → 90).
int combine_numerals(const std::vector<int>& values) {
    int total = 0;
    int current = 0;
    for (int v : values) {
        if (v == 100) {
            current = std::max(current, 1) * 100;
        } else if (v == 20 && current == 4) {
            current = 80;  // quatre-vingt
        } else if (v >= 10 && v <= 16 && (current == 60 || current == 80)) {
            current += v;  // soixante-dix, quatre-vingt-onze...
        } else if (v >= 20) {
            total += current;
            current = v;
        } else {
            current += v;
        }
    }
    return total + current;
}

struct WorkToken {
    std::string text;        // current surface (may have been replaced)
    std::size_t s1_begin;    // span in the stage-1 string
    std::size_t s1_end;
};

}  // namespace

// ---------------------------------------------------------------------------
// Normalizer
// ---------------------------------------------------------------------------

NormalizedText Normalizer::normalize(std::string_view raw) const {
    NormalizedText out;
    out.raw = std::string(raw);
    if (raw.empty()) return out;

    // Stage 1: character-level pass. Lowercase, strip punctuation (keeping
    // decimal points, clock colons and date slashes), map decimal commas.
    std::string stage1;
    std::vector<std::uint32_t> s1_begin;
    std::vector<std::uint32_t> s1_end;
    auto emit = [&](std::string_view text, std::size_t rb, std::size_t re) {
        for (std::size_t k = 0; k < text.size(); ++k) {
            stage1 += text[k];
            s1_begin.push_back(static_cast<std::uint32_t>(rb));
            s1_end.push_back(static_cast<std::uint32_t>(re));
        }
    };

    const std::string lowered = utf8_lower(raw);
    // utf8_lower is length-preserving for the French repertoire, so byte
    // offsets in `lowered` line up with `raw`.
    std::string low = lowered.size() == raw.size() ? lowered : std::string(raw);

    bool last_space = true;  // swallow leading separators
    for (std::size_t i = 0; i < low.size();) {
        unsigned char c = static_cast<unsigned char>(low[i]);
        std::size_t char_len = 1;
        if ((c & 0xE0) == 0xC0) char_len = 2;
        else if ((c & 0xF0) == 0xE0) char_len = 3;
        else if ((c & 0xF8) == 0xF0) char_len = 4;
        char_len = std::min(char_len, low.size() - i);

        auto prev_digit = [&]() { return !stage1.empty() && stage1.back() >= '0' && stage1.back() <= '9'; };
        auto next_digit = [&]() {
            return i + char_len < low.size() && low[i + char_len] >= '0' && low[i + char_len] <= '9';
        };
        auto emit_space = [&]() {
            if (!last_space) {
                emit(" ", i, i + char_len);
                last_space = true;
            }
        };

        if (char_len == 1) {
            if (c == ',' && prev_digit() && next_digit()) {
                emit(".", i, i + 1);
                out.repairs.push_back({i, i + 1, ".", RepairKind::punctuation});
                last_space = false;
            } else if (c == '.' || c == ':' || c == '/') {
                if (prev_digit() && next_digit()) {
                    emit(std::string_view(&low[i], 1), i, i + 1);
                    last_space = false;
                } else {
                    if (!last_space)
                        out.repairs.push_back({i, i + 1, " ", RepairKind::punctuation});
                    emit_space();
                }
            } else if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
                emit(std::string_view(&low[i], 1), i, i + 1);
                last_space = false;
            } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
                emit_space();
            } else {
                // punctuation: , ; ! ? ( ) ' - etc.
                if (!last_space || c != ' ')
                    out.repairs.push_back({i, i + 1, " ", RepairKind::punctuation});
                emit_space();
            }
        } else {
            // Multi-byte: accented letters pass through; typographic quotes,
            // dashes and guillemets become spaces.
            std::string_view seq(&low[i], char_len);
            bool keep = false;
            unsigned char c2 = char_len > 1 ? static_cast<unsigned char>(low[i + 1]) : 0;
            if (c == 0xC3) keep = true;                       // Latin-1 letters
            if (c == 0xC5 && (c2 == 0x93 || c2 == 0x92)) keep = true;  // œ Œ
            if (keep) {
                emit(seq, i, i + char_len);
                last_space = false;
            } else {
                out.repairs.push_back({i, i + char_len, " ", RepairKind::punctuation});
                emit_space();
            }
        }
        i += char_len;
    }
    while (!stage1.empty() && stage1.back() == ' ') {
        stage1.pop_back();
        s1_begin.pop_back();
        s1_end.pop_back();
    }

    // Stage 2: token-level pass. Number words → digits, abbreviation
    // expansion / tagging, single-edit OCR repair.
    std::vector<Token> tokens = tokenize(stage1);
    std::vector<WorkToken> work;
    work.reserve(tokens.size());

    std::size_t ti = 0;
    while (ti < tokens.size()) {
        const Token& tok = tokens[ti];
        if (tok.kind == TokenKind::Word && numeral_value(tok.folded) >= 0) {
            // Collect the numeral run, allowing "et" between numeral words.
            std::vector<int> values{numeral_value(tok.folded)};
            std::size_t tj = ti + 1;
            std::size_t last = ti;
            while (tj < tokens.size()) {
                if (tokens[tj].kind == TokenKind::Word &&
                    numeral_value(tokens[tj].folded) >= 0) {
                    values.push_back(numeral_value(tokens[tj].folded));
                    last = tj;
                    ++tj;
                } else if (tokens[tj].folded == "et" && tj + 1 < tokens.size() &&
                           tokens[tj + 1].kind == TokenKind::Word &&
                           numeral_value(tokens[tj + 1].folded) >= 0) {
                    values.push_back(numeral_value(tokens[tj + 1].folded));
                    last = tj + 1;
                    tj += 2;
                } else {
                    break;
                }
            }
            std::string replacement;
            // "un demi" → 0.5
            if (values.size() == 1 && values[0] == 1 && last + 1 < tokens.size() &&
                (tokens[last + 1].folded == "demi" || tokens[last + 1].folded == "demie")) {
                replacement = "0.5";
                last = last + 1;
            } else {
                replacement = std::to_string(combine_numerals(values));
            }
            std::size_t b = tokens[ti].begin;
            std::size_t e = tokens[last].end;
            work.push_back({replacement, b, e});
            out.repairs.push_back({s1_begin[b], s1_end[e - 1], replacement,
                                   RepairKind::abbreviation});
            ti = last + 1;
            continue;
        }

        WorkToken wt{tok.surface, tok.begin, tok.end};
        if (tok.kind == TokenKind::Word) {
            if (const Lexicon::Entry* entry = lexicon_.find(tok.folded)) {
                out.repairs.push_back({s1_begin[tok.begin], s1_end[tok.end - 1],
                                       entry->expansion, RepairKind::abbreviation});
                if (!entry->keep_token) wt.text = entry->expansion;
            } else if (tok.surface.size() >= 4 && !lexicon_.in_vocabulary(tok.folded)) {
                // Single-edit OCR repair against the lexicon vocabulary.
                std::string best;
                for (const auto& word : lexicon_.vocabulary()) {
                    if (word.size() + 1 < tok.folded.size() ||
                        tok.folded.size() + 1 < word.size())
                        continue;
                    if (edit_distance(tok.folded, word, 1) == 1) {
                        if (best.empty() || word < best) best = word;
                    }
                }
                if (!best.empty()) {
                    wt.text = best;
                    out.repairs.push_back({s1_begin[tok.begin], s1_end[tok.end - 1],
                                           best, RepairKind::ocr});
                }
            }
        }
        work.push_back(std::move(wt));
        ++ti;
    }

    // Assemble the final string and the normalized→raw byte map.
    for (std::size_t w = 0; w < work.size(); ++w) {
        const WorkToken& wt = work[w];
        if (w > 0) {
            std::size_t prev_raw = s1_end[work[w - 1].s1_end - 1];
            std::size_t next_raw = s1_begin[wt.s1_begin];
            out.normalized += ' ';
            out.map_begin.push_back(static_cast<std::uint32_t>(std::min(prev_raw, next_raw)));
            out.map_end.push_back(static_cast<std::uint32_t>(std::max(prev_raw, next_raw)));
        }
        const std::string original = stage1.substr(wt.s1_begin, wt.s1_end - wt.s1_begin);
        if (wt.text == original) {
            for (std::size_t k = wt.s1_begin; k < wt.s1_end; ++k) {
                out.normalized += stage1[k];
                out.map_begin.push_back(s1_begin[k]);
                out.map_end.push_back(s1_end[k]);
            }
        } else {
            // Replaced token: every byte maps to the whole source span.
            std::uint32_t rb = s1_begin[wt.s1_begin];
            std::uint32_t re = s1_end[wt.s1_end - 1];
            for (char c : wt.text) {
                out.normalized += c;
                out.map_begin.push_back(rb);
                out.map_end.push_back(re);
            }
        }
    }
    return out;
}

}  // namespace posodose
