#include "gridwatch/report.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gridwatch/rng.hpp"

namespace gridwatch::report {

MetricsReport score(const std::vector<int>& predictions, const std::vector<int>& truth,
                    const std::vector<std::string>& class_names) {
    if (predictions.size() != truth.size()) throw LengthMismatch();
    const std::size_t k = class_names.size();
    MetricsReport rep;
    rep.test_size = static_cast<int>(truth.size());
    rep.confusion.assign(k, std::vector<int>(k, 0));
    int correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        rep.confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predictions[i])]++;
        if (truth[i] == predictions[i]) ++correct;
    }
    rep.accuracy = truth.empty() ? 0.0 : static_cast<double>(correct) / truth.size();
    for (std::size_t c = 0; c < k; ++c) {
        ClassMetrics m;
        m.class_name = class_names[c];
        int tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            const bool t = truth[i] == static_cast<int>(c);
            const bool p = predictions[i] == static_cast<int>(c);
            tp += t && p;
            fp += !t && p;
            fn += t && !p;
        }
        m.support = tp + fn;
        m.no_support = (tp + fn == 0) && (tp + fp == 0);
        m.precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
        m.recall = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
        m.f1 = (m.precision + m.recall) > 0.0
                   ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                   : 0.0;
        rep.per_class.push_back(std::move(m));
    }
    return rep;
}

std::pair<double, double> bootstrap_ci(const std::vector<Outcome>& outcomes, int n_resamples,
                                       std::uint64_t seed) {
    if (outcomes.empty()) throw EmptyInput();
    if (n_resamples < 100) throw std::invalid_argument("bootstrap needs >= 100 resamples");
    Rng rng(seed);
    std::vector<double> f1s;
    f1s.reserve(static_cast<std::size_t>(n_resamples));
    const auto n = static_cast<std::int64_t>(outcomes.size());
    for (int r = 0; r < n_resamples; ++r) {
        int tp = 0, fp = 0, fn = 0;
        for (std::int64_t i = 0; i < n; ++i) {
            const auto& o = outcomes[static_cast<std::size_t>(rng.uniform_int(0, n - 1))];
            tp += o.predicted && o.actual;
            fp += o.predicted && !o.actual;
            fn += !o.predicted && o.actual;
        }
        const double p = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
        const double rec = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
        f1s.push_back((p + rec) > 0.0 ? 2.0 * p * rec / (p + rec) : 0.0);
    }
    std::sort(f1s.begin(), f1s.end());
    const auto last = static_cast<double>(f1s.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(0.025 * last));
    const auto hi = static_cast<std::size_t>(std::ceil(0.975 * last));
    return {f1s[lo], f1s[hi]};
}

MaskEvaluation evaluate_mask(const std::vector<events::Event>& events,
                             const events::CategoryMask& mask, const EvalOptions& options) {
    MaskEvaluation out;
    auto ds = events::apply_mask(events, mask);
    out.balanced = events::balance_sample(ds, options.seed);
    const auto& b = out.balanced;

    // stratified split, seeded per class
    std::vector<std::size_t> train_rows;
    Rng rng(options.seed ^ 0x5157a7ed);
    for (std::size_t c = 0; c < b.class_names.size(); ++c) {
        std::vector<std::size_t> ixs;
        for (std::size_t i = 0; i < b.labels.size(); ++i)
            if (b.labels[i] == static_cast<int>(c)) ixs.push_back(i);
        if (ixs.size() < 2)
            throw std::runtime_error("class " + b.class_names[c] + " too small to split");
        rng.shuffle(ixs);
        auto n_train = static_cast<std::size_t>(
            std::floor(options.split * static_cast<double>(ixs.size())));
        n_train = std::clamp<std::size_t>(n_train, 1, ixs.size() - 1);
        for (std::size_t i = 0; i < ixs.size(); ++i)
            (i < n_train ? train_rows : out.test_rows).push_back(ixs[i]);
    }
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(out.test_rows.begin(), out.test_rows.end());

    std::vector<std::vector<double>> x_train;
    std::vector<int> y_train;
    for (auto ix : train_rows) {
        x_train.push_back(b.rows[ix]);
        y_train.push_back(b.labels[ix]);
    }
    out.ensemble = ids::train_ova(x_train, y_train, b.class_names, b.feature_names, options.hyper);

    std::vector<int> y_test;
    for (auto ix : out.test_rows) {
        const auto scores = ids::predict(out.ensemble, b.rows[ix]);
        out.predictions.push_back(ids::meta_decide(scores).class_index);
        y_test.push_back(b.labels[ix]);
    }
    out.metrics = score(out.predictions, y_test, b.class_names);
    out.metrics.mask_name = mask.name();

    for (std::size_t c = 0; c < b.class_names.size(); ++c) {
        std::vector<Outcome> outcomes;
        outcomes.reserve(y_test.size());
        for (std::size_t i = 0; i < y_test.size(); ++i)
            outcomes.push_back(Outcome{out.predictions[i] == static_cast<int>(c),
                                       y_test[i] == static_cast<int>(c)});
        const auto ci = bootstrap_ci(outcomes, options.bootstrap_resamples,
                                     options.seed + 1000 + c);
        out.metrics.per_class[c].f1_ci_low = ci.first;
        out.metrics.per_class[c].f1_ci_high = ci.second;
    }
    return out;
}

ComparisonReport compare_masks(const std::vector<events::Event>& events,
                               const std::vector<events::CategoryMask>& masks,
                               const EvalOptions& options) {
    ComparisonReport rep;
    rep.seed = options.seed;
    rep.split = options.split;
    for (const auto& mask : masks)
        rep.reports.push_back(evaluate_mask(events, mask, options).metrics);
    return rep;
}

std::string comparison_csv(const ComparisonReport& report) {
    std::ostringstream out;
    out << "mask,class,precision,recall,f1,f1_ci_low,f1_ci_high,support,no_support\n";
    out.precision(10);
    for (const auto& rep : report.reports)
        for (const auto& m : rep.per_class)
            out << rep.mask_name << ',' << m.class_name << ',' << m.precision << ',' << m.recall
                << ',' << m.f1 << ',' << m.f1_ci_low << ',' << m.f1_ci_high << ',' << m.support
                << ',' << (m.no_support ? 1 : 0) << '\n';
    return out.str();
}

std::string confusion_csv(const MetricsReport& metrics) {
    std::ostringstream out;
    out << "truth\\predicted";
    for (const auto& m : metrics.per_class) out << ',' << m.class_name;
    out << '\n';
    for (std::size_t t = 0; t < metrics.confusion.size(); ++t) {
        out << metrics.per_class[t].class_name;
        for (int v : metrics.confusion[t]) out << ',' << v;
        out << '\n';
    }
    return out.str();
}

}  // namespace gridwatch::report
