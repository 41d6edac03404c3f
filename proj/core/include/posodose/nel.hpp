#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "posodose/ner.hpp"

namespace posodose {

class UnembeddableError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Word-vector table in the standard text format (one `token v1 .. vD` row
/// per line, optional `count dim` header). Out-of-vocabulary tokens are
/// composed from hashed character n-grams, FastText style; the table's
/// manifest records the scheme, seed and dimension.
class VectorTable {
public:
    VectorTable(int dim, std::uint64_t seed) : dim_(dim), seed_(seed) {}

    static VectorTable load(const std::string& path);

    int dim() const { return dim_; }
    std::uint64_t seed() const { return seed_; }
    std::size_t size() const { return vectors_.size(); }

    const std::vector<float>* find(const std::string& folded_token) const;
    void insert(const std::string& folded_token, std::vector<float> vector);

    /// Deterministic subword composition for any token (unit norm).
    std::vector<float> compose(const std::string& folded_token) const;

    nlohmann::json manifest() const;

private:
    int dim_;
    std::uint64_t seed_;
    std::unordered_map<std::string, std::vector<float>> vectors_;
};

/// Sentence embedding: mean of token vectors, unit norm.
class Embedder {
public:
    explicit Embedder(VectorTable table) : table_(std::move(table)) {}

    /// Throws UnembeddableError when the phrase has no word/number tokens.
    std::vector<float> embed(const std::string& phrase) const;

    const VectorTable& table() const { return table_; }

private:
    VectorTable table_;
};

double cosine(const std::vector<float>& a, const std::vector<float>& b);

struct UnitConcept {
    std::string code;
    std::string canonical_label;
    std::vector<std::string> synonyms;
    std::vector<float> vector;
};

class UnitCatalog {
public:
    static UnitCatalog load(const std::string& path, const Embedder& embedder);
    static UnitCatalog from_json(const nlohmann::json& doc, const Embedder& embedder);

    const std::vector<UnitConcept>& concepts() const { return concepts_; }
    bool empty() const { return concepts_.empty(); }

private:
    std::vector<UnitConcept> concepts_;
};

struct LinkCandidate {
    const UnitConcept* unit = nullptr;
    double similarity = 0.0;
    /// 0 = exact synonym, 1 = single-edit synonym, 2 = embedding similarity.
    int match_stage = 2;
};

/// Linker for dose-unit tokens: exact synonym → edit-distance-1 synonym →
/// embedding cosine, with a similarity floor below which no code is linked.
class Linker {
public:
    static constexpr double kSimilarityFloor = 0.4;

    Linker(UnitCatalog catalog, Embedder embedder)
        : catalog_(std::move(catalog)), embedder_(std::move(embedder)) {}

    /// Top-k candidates, ranked (match stage, similarity desc, label asc).
    /// Throws std::invalid_argument on an empty catalog or k < 1.
    std::vector<LinkCandidate> link(const Entity& entity, int k) const;
    std::vector<LinkCandidate> link_token(const std::string& token, int k) const;

    /// Annotate DOSE/FORM entities carrying a unit token with the best
    /// concept code when it clears the floor.
    void annotate(std::vector<Entity>& entities) const;

    const UnitCatalog& catalog() const { return catalog_; }
    const Embedder& embedder() const { return embedder_; }

private:
    UnitCatalog catalog_;
    Embedder embedder_;
};

}  // namespace posodose
