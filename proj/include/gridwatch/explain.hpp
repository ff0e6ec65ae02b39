#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridwatch/ids.hpp"

// Shapley attribution with an exact enumeration method (M <= 12) and a
// seeded permutation-sampling estimator. The value function masks features
// by background substitution; classifier attributions run on the raw
// (pre-sigmoid) score.
namespace gridwatch::explain {

using ValueFunction = std::function<double(const std::vector<double>&)>;

struct AttributionVector {
    std::vector<double> phi;
    double base_value = 0.0;  // value on the fully masked input
    double fx = 0.0;          // value on x
};

class TooManyFeatures : public std::runtime_error {
public:
    explicit TooManyFeatures(std::size_t m)
        : std::runtime_error("exact shapley limited to 12 features, got " + std::to_string(m)) {}
};

// Background reference: per-feature means over (up to) `sample` seeded rows.
std::vector<double> background_from_rows(const std::vector<std::vector<double>>& rows,
                                         std::size_t sample, std::uint64_t seed);

AttributionVector shapley_exact(const ValueFunction& f, const std::vector<double>& x,
                                const std::vector<double>& background);

// Mean marginal contribution over seeded random feature orderings; the
// residual against fx - base is folded back proportionally to |phi|.
AttributionVector shapley_sampled(const ValueFunction& f, const std::vector<double>& x,
                                  const std::vector<double>& background, int n_permutations,
                                  std::uint64_t seed);

// raw-score value function of one binary classifier
ValueFunction raw_score_fn(const ids::BinaryClassifier& classifier);

// Fusion-layer attribution: per-class raw scores act as the features of the
// most-confident meta rule and the winning softmax probability is explained.
AttributionVector attribute_fusion(const std::vector<double>& raw_scores,
                                   const std::vector<double>& background_raw, int winner);

struct FeatureImportance {
    std::string feature;
    double importance = 0.0;  // mean |phi|
};

// mean |phi| per feature over one class's attributions, sorted descending
std::vector<FeatureImportance> class_importance(
    const std::vector<AttributionVector>& attributions,
    const std::vector<std::string>& feature_names);

// overall impact of one instance
double instance_impact(const AttributionVector& attribution);

}  // namespace gridwatch::explain
