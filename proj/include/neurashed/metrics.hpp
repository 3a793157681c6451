#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "neurashed/dynamics.hpp"
#include "neurashed/errors.hpp"
#include "neurashed/graph.hpp"
#include "neurashed/rng.hpp"

namespace neurashed {

// Scores of every node at one level, in ascending node-id order.
struct ActivationVector {
    std::vector<double> values;

    friend bool operator==(const ActivationVector&, const ActivationVector&) = default;
};

inline ActivationVector level_activations(const Graph& g, const ModelState& state, const InputPattern& input,
                                          int level) {
    if (level < 1 || level >= g.num_levels())
        fail(ErrorCode::LevelOutOfRange,
             "level " + std::to_string(level) + " outside 1.." + std::to_string(g.num_levels() - 1));
    std::vector<double> score = node_scores(g, state, input);
    ActivationVector out;
    for (NodeId id : g.nodes_at_level(level)) out.values.push_back(score[static_cast<std::size_t>(id)]);
    return out;
}

struct MIEstimate {
    double mi_input_bits = 0.0;
    double mi_label_bits = 0.0;
    int mc_samples = 0;
    double sigma = 0.0;
    std::uint64_t seed = 0;
};

struct LabeledActivations {
    std::vector<ActivationVector> activations;
    std::vector<double> weights; // sampling weights, need not be normalized
    std::vector<int> labels;
};

namespace detail {

// log2 of a Gaussian mixture density at the given point, dropping the common
// -(d/2)log2(2*pi*sigma^2) constant (it cancels inside the MI ratios).
// Two passes (max exponent, then log-sum-exp) keep it allocation-free.
inline double log2_mixture_at(const std::vector<std::vector<double>>& mu, const std::vector<double>& log_p,
                              std::span<const int> members, const std::vector<double>& point, double sigma) {
    constexpr double log2e = std::numbers::log2e;
    auto exponent = [&](int jj) {
        const auto& m = mu[static_cast<std::size_t>(jj)];
        double d2 = 0.0;
        for (std::size_t c = 0; c < m.size(); ++c) {
            double diff = point[c] - m[c];
            d2 += diff * diff;
        }
        return log_p[static_cast<std::size_t>(jj)] * log2e - (d2 / (2.0 * sigma * sigma)) * log2e;
    };
    double best = -std::numeric_limits<double>::infinity();
    for (int jj : members) best = std::max(best, exponent(jj));
    double sum = 0.0;
    for (int jj : members) sum += std::exp2(exponent(jj) - best);
    return best + std::log2(sum);
}

} // namespace detail

// Noisy mutual information between activations and the input / the labels.
//
// Each activation vector is normalized by its own maximum absolute entry
// (zero vectors stay zero) to give the noiseless means mu(x); the channel is
// T = mu(X) + N(0, sigma^2 I). mi_input estimates
// I(X;T) = H(T) - H(T|X) with H(T|X) = (d/2) log2(2*pi*e*sigma^2) exact and
// H(T) by seeded Monte Carlo over the weighted mixture; mi_label does the
// same against the class-conditional mixtures. The two entropies share the
// same noise draws, so the Gaussian reference term cancels sample by sample:
// per draw the estimator averages log2 of density ratios, which keeps the
// estimate exactly 0 for identical means and pins well-separated
// configurations to their discrete entropy without Monte Carlo drift.
inline MIEstimate estimate_mutual_information(const LabeledActivations& data, double sigma, int mc_samples,
                                              std::uint64_t seed) {
    if (!(sigma > 0.0)) fail(ErrorCode::NonPositiveSigma, "sigma must be positive");
    if (mc_samples < 1) fail(ErrorCode::InvalidConfig, "mc_samples must be >= 1");
    const std::size_t n = data.activations.size();
    if (n == 0) fail(ErrorCode::EmptyDataset, "mutual information needs at least one pattern");
    if (data.weights.size() != n || data.labels.size() != n)
        fail(ErrorCode::InvalidConfig, "weights/labels must match the activation count");

    const std::size_t d = data.activations[0].values.size();
    for (const auto& a : data.activations)
        if (a.values.size() != d) fail(ErrorCode::InvalidConfig, "activation vectors must share one dimension");

    // Sup-norm normalization.
    std::vector<std::vector<double>> mu(n);
    for (std::size_t i = 0; i < n; ++i) {
        mu[i] = data.activations[i].values;
        double m = 0.0;
        for (double v : mu[i]) m = std::max(m, std::abs(v));
        if (m > 0.0)
            for (double& v : mu[i]) v /= m;
    }

    double total_w = 0.0;
    for (double w : data.weights) {
        if (!(w > 0.0)) fail(ErrorCode::InvalidConfig, "pattern weights must be positive");
        total_w += w;
    }
    std::vector<double> p(n), log_p(n);
    for (std::size_t i = 0; i < n; ++i) {
        p[i] = data.weights[i] / total_w;
        log_p[i] = std::log(p[i]);
    }

    // Class-conditional mixtures with weights renormalized within each class.
    std::map<int, std::vector<int>> by_label;
    for (std::size_t i = 0; i < n; ++i) by_label[data.labels[i]].push_back(static_cast<int>(i));
    std::vector<int> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = static_cast<int>(i);
    std::map<int, std::vector<double>> log_p_class; // per label: log conditional weights (full-length, only members used)
    for (const auto& [label, members] : by_label) {
        double wsum = 0.0;
        for (int i : members) wsum += p[static_cast<std::size_t>(i)];
        std::vector<double> lp(n, 0.0);
        for (int i : members) lp[static_cast<std::size_t>(i)] = std::log(p[static_cast<std::size_t>(i)] / wsum);
        log_p_class[label] = std::move(lp);
    }

    Rng rng(seed);
    double mi_input = 0.0;
    double mi_label = 0.0;
    std::vector<double> z(d), point(d);
    for (int k = 0; k < mc_samples; ++k) {
        for (std::size_t c = 0; c < d; ++c) z[c] = rng.gaussian();
        // log2 of the conditional density at mu_i + sigma*z, same constant dropped.
        double z2 = 0.0;
        for (double v : z) z2 += v * v;
        double log2_cond = -(z2 / 2.0) * std::numbers::log2e;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t c = 0; c < d; ++c) point[c] = mu[i][c] + sigma * z[c];
            double log2_mix = detail::log2_mixture_at(mu, log_p, all, point, sigma);
            double log2_class =
                detail::log2_mixture_at(mu, log_p_class[data.labels[i]], by_label[data.labels[i]], point, sigma);
            mi_input += p[i] * (log2_cond - log2_mix);
            mi_label += p[i] * (log2_class - log2_mix);
        }
    }

    MIEstimate est;
    est.mi_input_bits = mi_input / mc_samples;
    est.mi_label_bits = mi_label / mc_samples;
    est.mc_samples = mc_samples;
    est.sigma = sigma;
    est.seed = seed;
    return est;
}

// LE(x, x') = ||Z(x', w+) - Z(x', w)|| / ||Z(x, w+) - Z(x, w)|| where w+ is
// the state after one training step on {base}. The step runs on a copy, so
// measurement never perturbs training.
inline double local_elasticity(const Graph& g, const ModelState& state, const InputPattern& base,
                               const InputPattern& test, const UpdateSchedule& schedule, std::int64_t iteration) {
    std::vector<InputPattern> batch{base};
    ModelState updated = train_step(g, state, batch, schedule, iteration);

    std::vector<double> base_before = class_logits(g, state, base);
    std::vector<double> base_after = class_logits(g, updated, base);
    double denom = 0.0;
    for (std::size_t j = 0; j < base_before.size(); ++j) {
        double diff = base_after[j] - base_before[j];
        denom += diff * diff;
    }
    if (denom == 0.0)
        fail(ErrorCode::ZeroDenominator, "update at the base input left its own logits unchanged");

    std::vector<double> test_before = class_logits(g, state, test);
    std::vector<double> test_after = class_logits(g, updated, test);
    double numer = 0.0;
    for (std::size_t j = 0; j < test_before.size(); ++j) {
        double diff = test_after[j] - test_before[j];
        numer += diff * diff;
    }
    return std::sqrt(numer) / std::sqrt(denom);
}

using NodeGroups = std::vector<std::pair<std::string, std::vector<NodeId>>>;

// Normalized Shannon entropy of the lambda mass within each group.
// Conventions: singleton groups report 0, an all-zero group reports 1
// (maximally non-sparse - nothing has been singled out).
inline std::vector<std::pair<std::string, double>> sparsity_profile(const ModelState& state,
                                                                    const NodeGroups& groups) {
    std::vector<std::pair<std::string, double>> out;
    for (const auto& [name, ids] : groups) {
        if (ids.empty()) fail(ErrorCode::EmptyGroup, "group \"" + name + "\" is empty");
        if (ids.size() == 1) {
            out.emplace_back(name, 0.0);
            continue;
        }
        double sum = 0.0;
        for (NodeId id : ids) sum += state.lambda[static_cast<std::size_t>(id)];
        if (sum == 0.0) {
            out.emplace_back(name, 1.0);
            continue;
        }
        double h = 0.0;
        for (NodeId id : ids) {
            double q = state.lambda[static_cast<std::size_t>(id)] / sum;
            if (q > 0.0) h -= q * std::log2(q);
        }
        out.emplace_back(name, h / std::log2(static_cast<double>(ids.size())));
    }
    return out;
}

} // namespace neurashed
