#include "gridwatch/explain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gridwatch/rng.hpp"

namespace gridwatch::explain {

std::vector<double> background_from_rows(const std::vector<std::vector<double>>& rows,
                                         std::size_t sample, std::uint64_t seed) {
    if (rows.empty()) throw std::invalid_argument("background: empty row set");
    std::vector<std::size_t> ixs(rows.size());
    std::iota(ixs.begin(), ixs.end(), 0);
    Rng rng(seed);
    rng.shuffle(ixs);
    const std::size_t take = std::min(sample, ixs.size());
    std::vector<double> mean(rows[0].size(), 0.0);
    for (std::size_t k = 0; k < take; ++k)
        for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += rows[ixs[k]][j];
    for (auto& v : mean) v /= static_cast<double>(take);
    return mean;
}

AttributionVector shapley_exact(const ValueFunction& f, const std::vector<double>& x,
                                const std::vector<double>& background) {
    const std::size_t m = x.size();
    if (m > 12) throw TooManyFeatures(m);
    if (background.size() != m) throw std::invalid_argument("background dimension mismatch");

    const std::size_t n_subsets = 1u << m;
    std::vector<double> value(n_subsets);
    std::vector<double> probe(m);
    for (std::size_t mask = 0; mask < n_subsets; ++mask) {
        for (std::size_t j = 0; j < m; ++j)
            probe[j] = (mask & (1u << j)) ? x[j] : background[j];
        value[mask] = f(probe);
    }

    std::vector<double> fact(m + 1, 1.0);
    for (std::size_t k = 1; k <= m; ++k) fact[k] = fact[k - 1] * static_cast<double>(k);

    AttributionVector out;
    out.phi.assign(m, 0.0);
    out.base_value = value[0];
    out.fx = value[n_subsets - 1];
    for (std::size_t mask = 0; mask < n_subsets; ++mask) {
        const auto s = static_cast<std::size_t>(std::popcount(mask));
        for (std::size_t j = 0; j < m; ++j) {
            if (mask & (1u << j)) continue;
            const double weight = fact[s] * fact[m - s - 1] / fact[m];
            out.phi[j] += weight * (value[mask | (1u << j)] - value[mask]);
        }
    }
    return out;
}

AttributionVector shapley_sampled(const ValueFunction& f, const std::vector<double>& x,
                                  const std::vector<double>& background, int n_permutations,
                                  std::uint64_t seed) {
    const std::size_t m = x.size();
    if (background.size() != m) throw std::invalid_argument("background dimension mismatch");
    if (n_permutations < 1) throw std::invalid_argument("need at least one permutation");

    AttributionVector out;
    out.phi.assign(m, 0.0);
    out.base_value = f(background);
    out.fx = f(x);

    Rng rng(seed);
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> probe;
    for (int p = 0; p < n_permutations; ++p) {
        rng.shuffle(order);
        probe = background;
        double prev = out.base_value;
        for (std::size_t k = 0; k < m; ++k) {
            probe[order[k]] = x[order[k]];
            const double cur = f(probe);
            out.phi[order[k]] += cur - prev;
            prev = cur;
        }
    }
    for (auto& v : out.phi) v /= static_cast<double>(n_permutations);

    // efficiency correction: fold the residual back proportionally to |phi|
    double total = 0.0, abs_sum = 0.0;
    for (double v : out.phi) {
        total += v;
        abs_sum += std::abs(v);
    }
    const double residual = (out.fx - out.base_value) - total;
    if (abs_sum > 0.0) {
        for (auto& v : out.phi) v += residual * std::abs(v) / abs_sum;
    } else if (m > 0) {
        for (auto& v : out.phi) v += residual / static_cast<double>(m);
    }
    return out;
}

ValueFunction raw_score_fn(const ids::BinaryClassifier& classifier) {
    return [&classifier](const std::vector<double>& x) { return classifier.raw_score(x); };
}

AttributionVector attribute_fusion(const std::vector<double>& raw_scores,
                                   const std::vector<double>& background_raw, int winner) {
    auto value = [winner](const std::vector<double>& raw) {
        return ids::softmax(raw)[static_cast<std::size_t>(winner)];
    };
    return shapley_exact(value, raw_scores, background_raw);
}

std::vector<FeatureImportance> class_importance(
    const std::vector<AttributionVector>& attributions,
    const std::vector<std::string>& feature_names) {
    if (attributions.empty()) throw std::invalid_argument("class_importance: no attributions");
    std::vector<FeatureImportance> out;
    const std::size_t m = attributions[0].phi.size();
    for (std::size_t j = 0; j < m; ++j) {
        double acc = 0.0;
        for (const auto& a : attributions) acc += std::abs(a.phi[j]);
        FeatureImportance fi;
        fi.feature = j < feature_names.size() ? feature_names[j] : "f" + std::to_string(j);
        fi.importance = acc / static_cast<double>(attributions.size());
        out.push_back(std::move(fi));
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const auto& a, const auto& b) { return a.importance > b.importance; });
    return out;
}

double instance_impact(const AttributionVector& attribution) {
    double acc = 0.0;
    for (double v : attribution.phi) acc += std::abs(v);
    return acc;
}

}  // namespace gridwatch::explain
