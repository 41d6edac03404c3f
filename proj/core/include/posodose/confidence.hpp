#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "posodose/composer.hpp"
#include "posodose/ner.hpp"
#include "posodose/normalizer.hpp"
#include "posodose/schema.hpp"

namespace posodose {

/// Fixed-order feature vector over (query, structured output).
struct FeatureVector {
    std::vector<double> values;

    bool operator==(const FeatureVector&) const = default;
};

/// Names (and order) of the features produced by Featurizer.
const std::vector<std::string>& feature_names();

/// Computes features from the query text and the produced records; re-runs
/// the NERL front-end on the query for coverage/repair/warning features.
class Featurizer {
public:
    Featurizer(const Normalizer& normalizer, const Recognizer& recognizer,
               const Composer& composer)
        : normalizer_(&normalizer), recognizer_(&recognizer), composer_(&composer) {}

    FeatureVector featurize(const std::string& query,
                            const std::vector<PosologyStructure>& output) const;

private:
    const Normalizer* normalizer_;
    const Recognizer* recognizer_;
    const Composer* composer_;
};

struct ConfidenceReport {
    double score = 0.0;              // probability the output is correct
    double model_uncertainty = 0.0;  // 1 - score
    double aleatoric = 0.0;          // bits
    double epistemic = 0.0;          // bits, clamped at 0
    double total = 0.0;              // bits
    double epistemic_pre_clamp = 0.0;
    bool epistemic_clamped = false;
};

/// Binary Shannon entropy in bits.
double binary_entropy(double p);

/// Aggregate member probabilities into a ConfidenceReport: score is the
/// ensemble mean, total = H(score), aleatoric = mean member entropy,
/// epistemic = total − aleatoric (clamped at zero, clamp recorded).
ConfidenceReport decompose(const std::vector<double>& member_probabilities);

struct TrainingExample {
    std::string query;
    std::vector<PosologyStructure> output;
    bool correct = false;
};

struct GbtConfig {
    int member_count = 5;
    int rounds = 200;
    int max_depth = 4;
    double learning_rate = 0.1;
    int min_samples_leaf = 2;
};

/// One gradient-boosted tree model (logistic loss, regression trees).
class GradientBoostedTrees {
public:
    struct Node {
        int feature = -1;       // -1 for leaves
        double threshold = 0.0;
        double value = 0.0;     // leaf value
        int left = -1;
        int right = -1;
    };
    struct Tree {
        std::vector<Node> nodes;
        double eval(const std::vector<double>& x) const;
    };

    double predict_probability(const FeatureVector& f) const;

    static GradientBoostedTrees fit(const std::vector<FeatureVector>& features,
                                    const std::vector<int>& labels,
                                    const std::vector<std::size_t>& sample_indices,
                                    const GbtConfig& config);

    nlohmann::json to_json() const;
    static GradientBoostedTrees from_json(const nlohmann::json& j);

private:
    double base_score_ = 0.0;  // initial log-odds
    double learning_rate_ = 0.1;
    std::vector<Tree> trees_;
};

class TrainingError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Bootstrap ensemble of boosted-tree members plus its training manifest.
class EnsembleModel {
public:
    ConfidenceReport predict(const FeatureVector& f) const;
    std::vector<double> member_probabilities(const FeatureVector& f) const;

    const nlohmann::json& manifest() const { return manifest_; }
    std::size_t member_count() const { return members_.size(); }
    bool trained() const { return !members_.empty(); }

    static EnsembleModel train(const std::vector<TrainingExample>& examples,
                               const Featurizer& featurizer, std::uint64_t seed,
                               const GbtConfig& config = {});
    /// Train directly on pre-computed features (used by tests and tooling).
    static EnsembleModel train_on_features(const std::vector<FeatureVector>& features,
                                           const std::vector<int>& labels,
                                           std::uint64_t seed, const GbtConfig& config = {});

    void save(const std::string& path) const;
    static EnsembleModel load(const std::string& path);
    nlohmann::json to_json() const;
    static EnsembleModel from_json(const nlohmann::json& j);

private:
    std::vector<GradientBoostedTrees> members_;
    nlohmann::json manifest_;
};

struct CalibrationBin {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;
    double mean_score = 0.0;
    double accuracy = 0.0;
    double gap = 0.0;  // |mean_score - accuracy|
};

struct CalibrationReport {
    std::vector<CalibrationBin> bins;  // 10 bins partitioning [0, 1]
    double expected_calibration_error = 0.0;
};

CalibrationReport calibration_report(const std::vector<double>& scores,
                                     const std::vector<int>& labels);
CalibrationReport calibration_report(const EnsembleModel& model,
                                     const Featurizer& featurizer,
                                     const std::vector<TrainingExample>& held_out);

}  // namespace posodose
