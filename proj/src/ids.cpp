#include "gridwatch/ids.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <json.hpp>

#include "gridwatch/events.hpp"

namespace gridwatch::ids {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::vector<double> standardize(const BinaryClassifier& c, const std::vector<double>& x) {
    std::vector<double> z(x.size());
    for (std::size_t j = 0; j < x.size(); ++j)
        z[j] = c.feature_stds[j] > 0.0 ? (x[j] - c.feature_means[j]) / c.feature_stds[j] : 0.0;
    return z;
}

}  // namespace

double BinaryClassifier::raw_score(const std::vector<double>& x) const {
    if (x.size() != weights.size()) throw DimensionMismatch();
    const auto z = standardize(*this, x);
    double acc = bias;
    for (std::size_t j = 0; j < z.size(); ++j) acc += weights[j] * z[j];
    return acc;
}

double BinaryClassifier::score(const std::vector<double>& x) const {
    return sigmoid(raw_score(x));
}

BinaryClassifier train_binary(const std::vector<std::vector<double>>& rows,
                              const std::vector<int>& binary_labels, const Hyper& hyper,
                              const std::string& target_class) {
    const std::size_t n = rows.size();
    if (n == 0 || binary_labels.size() != n)
        throw std::invalid_argument("train_binary: bad input sizes");
    const std::size_t d = rows[0].size();
    int pos = 0;
    for (int y : binary_labels) pos += y;
    if (pos == 0 || pos == static_cast<int>(n)) throw DegenerateLabels();

    BinaryClassifier c;
    c.target_class = target_class;
    c.feature_means.assign(d, 0.0);
    c.feature_stds.assign(d, 0.0);
    for (const auto& row : rows)
        for (std::size_t j = 0; j < d; ++j) c.feature_means[j] += row[j];
    for (std::size_t j = 0; j < d; ++j) c.feature_means[j] /= static_cast<double>(n);
    for (const auto& row : rows)
        for (std::size_t j = 0; j < d; ++j) {
            const double delta = row[j] - c.feature_means[j];
            c.feature_stds[j] += delta * delta;
        }
    for (std::size_t j = 0; j < d; ++j)
        c.feature_stds[j] = std::sqrt(c.feature_stds[j] / static_cast<double>(n));

    // pre-standardized copy of the data
    std::vector<std::vector<double>> z(n, std::vector<double>(d));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j)
            z[i][j] = c.feature_stds[j] > 0.0
                          ? (rows[i][j] - c.feature_means[j]) / c.feature_stds[j]
                          : 0.0;

    c.weights.assign(d, 0.0);
    c.bias = 0.0;
    c.loss_history.reserve(static_cast<std::size_t>(hyper.iterations));

    std::vector<double> grad(d);
    for (int iter = 0; iter < hyper.iterations; ++iter) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double grad_b = 0.0;
        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double acc = c.bias;
            for (std::size_t j = 0; j < d; ++j) acc += c.weights[j] * z[i][j];
            const double p = sigmoid(acc);
            const double y = binary_labels[i];
            const double err = p - y;
            for (std::size_t j = 0; j < d; ++j) grad[j] += err * z[i][j];
            grad_b += err;
            const double eps = 1e-12;
            loss -= y * std::log(std::max(p, eps)) + (1.0 - y) * std::log(std::max(1.0 - p, eps));
        }
        loss /= static_cast<double>(n);
        double reg = 0.0;
        for (double w : c.weights) reg += w * w;
        loss += 0.5 * hyper.l2_lambda * reg;
        c.loss_history.push_back(loss);

        for (std::size_t j = 0; j < d; ++j) {
            const double g = grad[j] / static_cast<double>(n) + hyper.l2_lambda * c.weights[j];
            c.weights[j] -= hyper.learning_rate * g;
        }
        c.bias -= hyper.learning_rate * grad_b / static_cast<double>(n);
    }
    return c;
}

OvaEnsemble train_ova(const std::vector<std::vector<double>>& rows,
                      const std::vector<int>& labels,
                      const std::vector<std::string>& class_names,
                      const std::vector<std::string>& feature_names, const Hyper& hyper) {
    OvaEnsemble ens;
    ens.class_names = class_names;
    ens.feature_names = feature_names;
    ens.hyper = hyper;
    for (std::size_t c = 0; c < class_names.size(); ++c) {
        std::vector<int> binary(labels.size());
        for (std::size_t i = 0; i < labels.size(); ++i)
            binary[i] = labels[i] == static_cast<int>(c) ? 1 : 0;
        ens.classifiers.push_back(train_binary(rows, binary, hyper, class_names[c]));
    }
    return ens;
}

std::vector<double> softmax(const std::vector<double>& raw) {
    std::vector<double> out(raw.size());
    const double mx = *std::max_element(raw.begin(), raw.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        out[i] = std::exp(raw[i] - mx);
        sum += out[i];
    }
    for (auto& v : out) v /= sum;
    return out;
}

ClassScores predict(const OvaEnsemble& ensemble, const std::vector<double>& x) {
    ClassScores s;
    s.raw.reserve(ensemble.classifiers.size());
    for (const auto& c : ensemble.classifiers) s.raw.push_back(c.score(x));
    s.probs = softmax(s.raw);
    return s;
}

MetaDecision meta_decide(const ClassScores& scores) {
    MetaDecision d;
    d.class_index = 0;
    d.confidence = scores.probs.empty() ? 0.0 : scores.probs[0];
    for (std::size_t i = 1; i < scores.probs.size(); ++i) {
        if (scores.probs[i] > d.confidence) {
            d.confidence = scores.probs[i];
            d.class_index = static_cast<int>(i);
        }
    }
    return d;
}

std::vector<WindowDecision> window_scan(const std::vector<double>& times,
                                        const std::vector<std::vector<double>>& rows,
                                        const OvaEnsemble& ensemble, const WindowConfig& config) {
    std::vector<WindowDecision> out;
    if (times.empty() || rows.size() != times.size()) return out;

    std::vector<MetaDecision> decisions(times.size());
    for (std::size_t i = 0; i < rows.size(); ++i) decisions[i] = meta_decide(predict(ensemble, rows[i]));

    const double t_first = times.front();
    const double t_last = times.back();
    const double span = t_last - t_first;
    if (span < config.length_s) return out;
    const auto n_windows =
        static_cast<std::size_t>(std::floor((span - config.length_s) / config.stride_s)) + 1;

    std::size_t lo = 0;
    for (std::size_t w = 0; w < n_windows; ++w) {
        const double t0 = t_first + static_cast<double>(w) * config.stride_s;
        const double t1 = t0 + config.length_s;
        while (lo < times.size() && times[lo] < t0) ++lo;
        std::size_t hi = lo;
        while (hi < times.size() && times[hi] < t1) ++hi;
        const int count = static_cast<int>(hi - lo);
        if (count < config.min_events) continue;

        std::map<int, std::pair<int, double>> tally;  // class -> (votes, conf sum)
        for (std::size_t i = lo; i < hi; ++i) {
            auto& t = tally[decisions[i].class_index];
            t.first += 1;
            t.second += decisions[i].confidence;
        }
        int best = -1;
        int best_votes = -1;
        double best_mean = -1.0;
        for (const auto& [cls, agg] : tally) {
            const double mean = agg.second / agg.first;
            if (agg.first > best_votes ||
                (agg.first == best_votes && mean > best_mean)) {
                best = cls;
                best_votes = agg.first;
                best_mean = mean;
            }
        }
        WindowDecision wd;
        wd.t0 = t0;
        wd.t1 = t1;
        wd.class_index = best;
        wd.mean_confidence = best_mean;
        wd.event_count = count;
        wd.anomalous = ensemble.class_names[static_cast<std::size_t>(best)] != "Normal";
        out.push_back(wd);
    }
    return out;
}

std::vector<SequenceAlarm> detect_sequence(const std::vector<WindowDecision>& decisions,
                                           const std::vector<std::string>& class_names,
                                           const SequenceConfig& config) {
    std::vector<SequenceAlarm> alarms;
    const auto& order = netsim::canonical_phase_order();
    auto canon_index = [&](netsim::MitrePhase p) {
        for (std::size_t i = 0; i < order.size(); ++i)
            if (order[i] == p) return static_cast<int>(i);
        return -1;
    };

    // distinct phases in order of first appearance
    std::vector<netsim::MitrePhase> first_seen;
    std::vector<double> first_ts;
    double last_ts = 0.0;
    for (const auto& d : decisions) {
        if (!d.anomalous) continue;
        const auto& cls = class_names[static_cast<std::size_t>(d.class_index)];
        if (cls == "Normal") continue;
        const auto phase = events::phase_of_class(cls);
        last_ts = d.t1;
        if (std::find(first_seen.begin(), first_seen.end(), phase) == first_seen.end()) {
            first_seen.push_back(phase);
            first_ts.push_back(d.t0);
        }
    }
    if (static_cast<int>(first_seen.size()) < config.min_phases) return alarms;

    // longest canonical-order subsequence over the first-appearance sequence
    const std::size_t m = first_seen.size();
    std::vector<int> best(m, 1), prev(m, -1);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (canon_index(first_seen[j]) < canon_index(first_seen[i]) && best[j] + 1 > best[i]) {
                best[i] = best[j] + 1;
                prev[i] = static_cast<int>(j);
            }
    int end = 0;
    for (std::size_t i = 1; i < m; ++i)
        if (best[i] > best[end]) end = static_cast<int>(i);

    SequenceAlarm alarm;
    alarm.last_ts = last_ts;
    if (best[static_cast<std::size_t>(end)] >= config.min_phases) {
        alarm.ordered = true;
        std::vector<netsim::MitrePhase> chain;
        for (int i = end; i >= 0; i = prev[static_cast<std::size_t>(i)]) {
            chain.push_back(first_seen[static_cast<std::size_t>(i)]);
            if (prev[static_cast<std::size_t>(i)] < 0) break;
        }
        std::reverse(chain.begin(), chain.end());
        alarm.phases = std::move(chain);
        alarm.first_ts = first_ts.front();
    } else {
        alarm.ordered = false;
        alarm.phases = first_seen;
        alarm.first_ts = first_ts.front();
    }
    alarms.push_back(std::move(alarm));
    return alarms;
}

std::string save_model(const OvaEnsemble& ensemble) {
    nlohmann::ordered_json j;
    j["classes"] = ensemble.class_names;
    j["feature_columns"] = ensemble.feature_names;
    std::uint64_t hash = 1469598103934665603ULL;
    for (const auto& f : ensemble.feature_names)
        for (char ch : f) {
            hash ^= static_cast<std::uint8_t>(ch);
            hash *= 1099511628211ULL;
        }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    j["schema_hash"] = buf;
    j["hyper"] = {{"learning_rate", ensemble.hyper.learning_rate},
                  {"iterations", ensemble.hyper.iterations},
                  {"l2_lambda", ensemble.hyper.l2_lambda}};
    j["classifiers"] = nlohmann::ordered_json::array();
    for (const auto& c : ensemble.classifiers) {
        nlohmann::ordered_json cj;
        cj["class"] = c.target_class;
        cj["weights"] = c.weights;
        cj["bias"] = c.bias;
        cj["means"] = c.feature_means;
        cj["stds"] = c.feature_stds;
        j["classifiers"].push_back(cj);
    }
    return j.dump(2);
}

OvaEnsemble load_model(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    OvaEnsemble ens;
    ens.class_names = j.at("classes").get<std::vector<std::string>>();
    ens.feature_names = j.at("feature_columns").get<std::vector<std::string>>();
    ens.hyper.learning_rate = j.at("hyper").at("learning_rate").get<double>();
    ens.hyper.iterations = j.at("hyper").at("iterations").get<int>();
    ens.hyper.l2_lambda = j.at("hyper").at("l2_lambda").get<double>();
    for (const auto& cj : j.at("classifiers")) {
        BinaryClassifier c;
        c.target_class = cj.at("class").get<std::string>();
        c.weights = cj.at("weights").get<std::vector<double>>();
        c.bias = cj.at("bias").get<double>();
        c.feature_means = cj.at("means").get<std::vector<double>>();
        c.feature_stds = cj.at("stds").get<std::vector<double>>();
        ens.classifiers.push_back(std::move(c));
    }
    return ens;
}

}  // namespace gridwatch::ids
