#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridwatch/capture.hpp"

// One-vs-All ensemble: L2-regularized logistic regression per class trained
// by deterministic full-batch gradient descent, softmax fusion, a
// most-confident meta rule, time-window scanning and kill-chain sequence
// detection.
namespace gridwatch::ids {

struct Hyper {
    double learning_rate = 0.1;
    int iterations = 500;
    double l2_lambda = 1e-3;
};

class DegenerateLabels : public std::runtime_error {
public:
    DegenerateLabels() : std::runtime_error("training labels contain a single class") {}
};
class DimensionMismatch : public std::runtime_error {
public:
    DimensionMismatch() : std::runtime_error("feature dimension does not match training") {}
};

struct BinaryClassifier {
    std::string target_class;
    std::vector<double> weights;
    double bias = 0.0;
    std::vector<double> feature_means;
    std::vector<double> feature_stds;  // 0 marks a constant column (dropped to 0)
    std::vector<double> loss_history;  // regularized cross-entropy per iteration

    double raw_score(const std::vector<double>& x) const;  // pre-sigmoid
    double score(const std::vector<double>& x) const;      // sigmoid(raw)
};

BinaryClassifier train_binary(const std::vector<std::vector<double>>& rows,
                              const std::vector<int>& binary_labels, const Hyper& hyper,
                              const std::string& target_class = "");

struct ClassScores {
    std::vector<double> raw;    // per-class sigmoid scores
    std::vector<double> probs;  // softmax of raw
};

struct OvaEnsemble {
    std::vector<std::string> class_names;
    std::vector<std::string> feature_names;
    Hyper hyper;
    std::vector<BinaryClassifier> classifiers;
};

OvaEnsemble train_ova(const std::vector<std::vector<double>>& rows,
                      const std::vector<int>& labels,
                      const std::vector<std::string>& class_names,
                      const std::vector<std::string>& feature_names, const Hyper& hyper);

std::vector<double> softmax(const std::vector<double>& raw);

ClassScores predict(const OvaEnsemble& ensemble, const std::vector<double>& x);

struct MetaDecision {
    int class_index = 0;
    double confidence = 0.0;
};
MetaDecision meta_decide(const ClassScores& scores);

struct WindowConfig {
    double length_s = 5.0;
    double stride_s = 1.0;
    int min_events = 3;
};

struct WindowDecision {
    double t0 = 0.0, t1 = 0.0;
    int class_index = 0;
    double mean_confidence = 0.0;
    int event_count = 0;
    bool anomalous = false;
};

// Slides [t, t+length) over the event span; window class is the majority
// per-event meta class (ties by higher mean confidence, then lower index).
std::vector<WindowDecision> window_scan(const std::vector<double>& times,
                                        const std::vector<std::vector<double>>& rows,
                                        const OvaEnsemble& ensemble, const WindowConfig& config);

struct SequenceAlarm {
    bool ordered = false;
    std::vector<netsim::MitrePhase> phases;
    double first_ts = 0.0, last_ts = 0.0;
};

struct SequenceConfig {
    int min_phases = 2;
};

// Maps anomalous windows onto MITRE phases and checks whether the distinct
// phases (in order of first appearance) contain a canonical-order chain of
// at least min_phases; if not, the same phases in violated order raise an
// atypical (ordered=false) alarm.
std::vector<SequenceAlarm> detect_sequence(const std::vector<WindowDecision>& decisions,
                                           const std::vector<std::string>& class_names,
                                           const SequenceConfig& config = {});

std::string save_model(const OvaEnsemble& ensemble);
OvaEnsemble load_model(const std::string& text);

}  // namespace gridwatch::ids
