#include "posodose/nel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "posodose/textutil.hpp"

namespace posodose {

namespace {

std::uint64_t fnv1a(std::string_view data, std::uint64_t seed) {
    std::uint64_t h = 1469598103934665603ull ^ seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

void l2_normalize(std::vector<float>& v) {
    double norm = 0.0;
    for (float x : v) norm += static_cast<double>(x) * x;
    norm = std::sqrt(norm);
    if (norm > 0.0)
        for (float& x : v) x = static_cast<float>(x / norm);
}

}  // namespace

// ---------------------------------------------------------------------------
// VectorTable
// ---------------------------------------------------------------------------

VectorTable VectorTable::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open vector table: " + path);

    // Manifest header lines: "#posodose-vectors seed=<n> dim=<n>".
    int dim = 64;
    std::uint64_t seed = 0x706f736f646f7365ull;
    std::string line;
    std::vector<std::pair<std::string, std::vector<float>>> rows;
    bool first_content = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream hs(line.substr(1));
            std::string word;
            while (hs >> word) {
                if (word.rfind("seed=", 0) == 0) seed = std::stoull(word.substr(5));
                if (word.rfind("dim=", 0) == 0) dim = std::stoi(word.substr(4));
            }
            continue;
        }
        std::istringstream ls(line);
        std::string token;
        ls >> token;
        std::vector<float> values;
        float v;
        while (ls >> v) values.push_back(v);
        if (first_content && values.size() == 1 &&
            token.find_first_not_of("0123456789") == std::string::npos) {
            // "count dim" header in the word2vec text convention
            dim = static_cast<int>(values[0]);
            first_content = false;
            continue;
        }
        first_content = false;
        if (values.empty()) continue;
        rows.emplace_back(fold_accents(token), std::move(values));
    }

    if (!rows.empty()) dim = static_cast<int>(rows.front().second.size());
    VectorTable table(dim, seed);
    for (auto& [token, values] : rows) {
        if (static_cast<int>(values.size()) != dim)
            throw std::runtime_error("vector table row for '" + token +
                                     "' has inconsistent dimension");
        table.insert(token, std::move(values));
    }
    return table;
}

const std::vector<float>* VectorTable::find(const std::string& folded_token) const {
    auto it = vectors_.find(folded_token);
    return it == vectors_.end() ? nullptr : &it->second;
}

void VectorTable::insert(const std::string& folded_token, std::vector<float> vector) {
    vectors_[folded_token] = std::move(vector);
}

std::vector<float> VectorTable::compose(const std::string& folded_token) const {
    // Hashed character n-grams (3..5) over the padded token, summed.
    std::string padded = "<" + folded_token + ">";
    std::vector<float> acc(dim_, 0.0f);
    int ngrams = 0;
    for (std::size_t n = 3; n <= 5; ++n) {
        if (padded.size() < n) continue;
        for (std::size_t i = 0; i + n <= padded.size(); ++i) {
            std::uint64_t state = fnv1a(std::string_view(padded).substr(i, n), seed_);
            for (int d = 0; d < dim_; ++d) {
                // uniform in [-1, 1]
                double u = static_cast<double>(splitmix64(state) >> 11) /
                           static_cast<double>(1ull << 53);
                acc[d] += static_cast<float>(2.0 * u - 1.0);
            }
            ++ngrams;
        }
    }
    if (ngrams == 0 && !padded.empty()) {
        std::uint64_t state = fnv1a(padded, seed_);
        for (int d = 0; d < dim_; ++d) {
            double u = static_cast<double>(splitmix64(state) >> 11) /
                       static_cast<double>(1ull << 53);
            acc[d] = static_cast<float>(2.0 * u - 1.0);
        }
    }
    l2_normalize(acc);
    return acc;
}

nlohmann::json VectorTable::manifest() const {
    return {{"scheme", "hashed-char-ngram(3..5)"},
            {"dim", dim_},
            {"seed", seed_},
            {"entries", vectors_.size()}};
}

// ---------------------------------------------------------------------------
// Embedder
// ---------------------------------------------------------------------------

std::vector<float> Embedder::embed(const std::string& phrase) const {
    auto tokens = tokenize(phrase);
    std::vector<float> acc(table_.dim(), 0.0f);
    int used = 0;
    for (const auto& tok : tokens) {
        std::vector<float> v;
        if (const auto* hit = table_.find(tok.folded)) {
            v = *hit;
            l2_normalize(v);
        } else {
            v = table_.compose(tok.folded);
        }
        bool nonzero = std::any_of(v.begin(), v.end(), [](float x) { return x != 0.0f; });
        if (!nonzero) continue;
        for (int d = 0; d < table_.dim(); ++d) acc[d] += v[d];
        ++used;
    }
    if (used == 0) throw UnembeddableError("unembeddable: '" + phrase + "'");
    for (float& x : acc) x /= static_cast<float>(used);
    l2_normalize(acc);
    return acc;
}

double cosine(const std::vector<float>& a, const std::vector<float>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

// ---------------------------------------------------------------------------
// UnitCatalog
// ---------------------------------------------------------------------------

UnitCatalog UnitCatalog::load(const std::string& path, const Embedder& embedder) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open unit catalog: " + path);
    nlohmann::json doc;
    in >> doc;
    return from_json(doc, embedder);
}

UnitCatalog UnitCatalog::from_json(const nlohmann::json& doc, const Embedder& embedder) {
    if (!doc.is_array()) throw std::runtime_error("unit catalog must be a JSON list");
    UnitCatalog catalog;
    for (const auto& item : doc) {
        UnitConcept uc;
        uc.code = item.at("code").get<std::string>();
        uc.canonical_label = item.at("canonical_label").get<std::string>();
        if (item.contains("synonyms"))
            uc.synonyms = item.at("synonyms").get<std::vector<std::string>>();

        // Concept vector: mean of the label and synonym embeddings.
        std::vector<float> acc;
        int used = 0;
        std::vector<std::string> phrases = uc.synonyms;
        phrases.push_back(uc.canonical_label);
        for (const auto& phrase : phrases) {
            try {
                auto v = embedder.embed(phrase);
                if (acc.empty()) acc.assign(v.size(), 0.0f);
                for (std::size_t d = 0; d < v.size(); ++d) acc[d] += v[d];
                ++used;
            } catch (const UnembeddableError&) {
                // skip phrases with no tokens
            }
        }
        if (used > 0) {
            for (float& x : acc) x /= static_cast<float>(used);
            l2_normalize(acc);
        }
        uc.vector = std::move(acc);
        catalog.concepts_.push_back(std::move(uc));
    }
    return catalog;
}

// ---------------------------------------------------------------------------
// Linker
// ---------------------------------------------------------------------------

std::vector<LinkCandidate> Linker::link_token(const std::string& token, int k) const {
    if (catalog_.empty()) throw std::invalid_argument("unit catalog is empty");
    if (k < 1) throw std::invalid_argument("k must be >= 1");

    const std::string folded = fold_accents(token);
    std::vector<float> query;
    bool embeddable = true;
    try {
        query = embedder_.embed(token);
    } catch (const UnembeddableError&) {
        embeddable = false;
    }

    std::vector<LinkCandidate> candidates;
    for (const auto& uc : catalog_.concepts()) {
        LinkCandidate cand;
        cand.unit = &uc;
        cand.similarity =
            (embeddable && !uc.vector.empty()) ? cosine(query, uc.vector) : 0.0;
        cand.match_stage = 2;

        auto matches = [&](const std::string& phrase, int stage_limit) {
            const std::string folded_phrase = fold_accents(phrase);
            if (folded_phrase == folded) return 0;
            if (stage_limit >= 1 && edit_distance(folded_phrase, folded, 1) == 1) return 1;
            return 2;
        };
        int best_stage = matches(uc.canonical_label, 1);
        for (const auto& syn : uc.synonyms)
            best_stage = std::min(best_stage, matches(syn, 1));
        cand.match_stage = best_stage;
        if (best_stage == 0) cand.similarity = 1.0;
        candidates.push_back(cand);
    }

    std::sort(candidates.begin(), candidates.end(),
              [](const LinkCandidate& a, const LinkCandidate& b) {
                  if (a.match_stage != b.match_stage) return a.match_stage < b.match_stage;
                  if (a.similarity != b.similarity) return a.similarity > b.similarity;
                  return a.unit->canonical_label < b.unit->canonical_label;
              });
    if (static_cast<int>(candidates.size()) > k) candidates.resize(k);
    return candidates;
}

std::vector<LinkCandidate> Linker::link(const Entity& entity, int k) const {
    std::string token;
    if (entity.attributes.contains("unit_token"))
        token = entity.attributes.at("unit_token").get<std::string>();
    else
        token = entity.surface;
    return link_token(token, k);
}

void Linker::annotate(std::vector<Entity>& entities) const {
    for (auto& e : entities) {
        bool linkable = (e.type == EntityType::DOSE && e.attributes.contains("unit_token")) ||
                        e.type == EntityType::FORM;
        if (!linkable) continue;
        auto ranked = link(e, 1);
        if (ranked.empty()) continue;
        const auto& best = ranked.front();
        if (best.match_stage <= 1 || best.similarity >= kSimilarityFloor)
            e.attributes["code"] = best.unit->code;
    }
}

}  // namespace posodose
