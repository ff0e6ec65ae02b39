#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridwatch/events.hpp"
#include "gridwatch/ids.hpp"

// Scoring, bootstrap confidence intervals and the seven-mask comparison
// harness behind the IT-only vs process-aware evaluation.
namespace gridwatch::report {

class LengthMismatch : public std::runtime_error {
public:
    LengthMismatch() : std::runtime_error("predictions and truth differ in length") {}
};
class EmptyInput : public std::runtime_error {
public:
    EmptyInput() : std::runtime_error("empty input") {}
};

struct ClassMetrics {
    std::string class_name;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    int support = 0;        // truth count in the test set
    bool no_support = false;  // absent from truth and predictions
    double f1_ci_low = 0.0;
    double f1_ci_high = 0.0;
};

struct MetricsReport {
    std::string mask_name;
    std::vector<ClassMetrics> per_class;
    std::vector<std::vector<int>> confusion;  // truth x predicted
    double accuracy = 0.0;
    int test_size = 0;
};

// per-class one-vs-rest precision/recall/F1 plus the confusion matrix
MetricsReport score(const std::vector<int>& predictions, const std::vector<int>& truth,
                    const std::vector<std::string>& class_names);

struct Outcome {
    int predicted = 0;  // 1 when predicted positive for the class
    int actual = 0;     // 1 when truly positive
};

// percentile 95% CI of F1 over seeded resamples with replacement
std::pair<double, double> bootstrap_ci(const std::vector<Outcome>& outcomes, int n_resamples,
                                       std::uint64_t seed);

struct EvalOptions {
    double split = 0.7;  // train fraction
    int bootstrap_resamples = 500;
    std::uint64_t seed = 1;
    ids::Hyper hyper;
};

struct MaskEvaluation {
    MetricsReport metrics;
    ids::OvaEnsemble ensemble;
    // test partition in balanced-dataset row indices, plus model inputs for
    // downstream attribution
    std::vector<std::size_t> test_rows;
    events::LabeledDataset balanced;
    std::vector<int> predictions;  // per test row
};

struct ComparisonReport {
    std::vector<MetricsReport> reports;
    std::string it_only_mask = "IT";
    std::string process_aware_mask = "IT+OT+ET";
    std::uint64_t seed = 0;
    double split = 0.7;
};

// balanced sample -> stratified split -> train OVA -> score, for one mask
MaskEvaluation evaluate_mask(const std::vector<events::Event>& events,
                             const events::CategoryMask& mask, const EvalOptions& options);

ComparisonReport compare_masks(const std::vector<events::Event>& events,
                               const std::vector<events::CategoryMask>& masks,
                               const EvalOptions& options);

std::string comparison_csv(const ComparisonReport& report);
std::string confusion_csv(const MetricsReport& metrics);

}  // namespace gridwatch::report
