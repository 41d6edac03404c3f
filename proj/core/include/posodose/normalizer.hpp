#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace posodose {

enum class RepairKind { abbreviation, ocr, punctuation };

struct Repair {
    std::size_t raw_begin = 0;
    std::size_t raw_end = 0;
    std::string replacement;
    RepairKind kind = RepairKind::punctuation;
};

/// Normalized query text plus the alignment back to the raw input.
struct NormalizedText {
    std::string raw;
    std::string normalized;
    // Per normalized byte: originating [begin, end) byte range in raw.
    std::vector<std::uint32_t> map_begin;
    std::vector<std::uint32_t> map_end;
    std::vector<Repair> repairs;

    /// Raw byte span backing a normalized span.
    std::pair<std::size_t, std::size_t> raw_span(std::size_t norm_begin,
                                                 std::size_t norm_end) const;
};

/// Abbreviation and vocabulary lexicon, loaded from a plain-text file:
/// one entry per line, `abbrev<TAB>expansion[<TAB>keep]`; a line with a
/// single column declares a vocabulary word (an OCR-repair target).
class Lexicon {
public:
    struct Entry {
        std::string expansion;
        bool keep_token = false;  // tag the abbreviation but keep the surface
    };

    static Lexicon load(const std::string& path);
    static Lexicon from_text(std::string_view text);

    const Entry* find(std::string_view folded_token) const;
    bool in_vocabulary(std::string_view folded_token) const;
    const std::set<std::string>& vocabulary() const { return vocabulary_; }
    const std::map<std::string, Entry>& entries() const { return entries_; }

private:
    std::map<std::string, Entry> entries_;  // folded abbrev → entry
    std::set<std::string> vocabulary_;      // folded repair targets / protected words
};

/// Text repair and normalization ahead of entity recognition: lowercasing,
/// punctuation stripping, abbreviation handling, single-edit OCR repair and
/// French number-word conversion.
class Normalizer {
public:
    explicit Normalizer(Lexicon lexicon) : lexicon_(std::move(lexicon)) {}

    NormalizedText normalize(std::string_view raw) const;

    const Lexicon& lexicon() const { return lexicon_; }

private:
    Lexicon lexicon_;
};

}  // namespace posodose
