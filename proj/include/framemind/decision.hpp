// SPDX-License-Identifier: Apache-2.0
#pragma once

// Log-linear (softmax) decisions. A decision lists the feature vector of
// every option and which option was taken; its probability under parameters
// theta is softmax(theta . phi)[chosen].

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace framemind {

using SparseFeatures = std::vector<std::pair<std::size_t, double>>;

struct Decision {
    std::string name;
    std::vector<SparseFeatures> options;
    std::size_t chosen = 0;
};

inline double dot(std::span<const double> theta, const SparseFeatures& phi) {
    double s = 0.0;
    for (const auto& [i, v] : phi) s += theta[i] * v;
    return s;
}

inline std::vector<double> option_logits(std::span<const double> theta, const Decision& d) {
    std::vector<double> z;
    z.reserve(d.options.size());
    for (const auto& phi : d.options) z.push_back(dot(theta, phi));
    return z;
}

inline std::vector<double> softmax(std::span<const double> logits) {
    const double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p;
    p.reserve(logits.size());
    double sum = 0.0;
    for (double z : logits) {
        p.push_back(std::exp(z - m));
        sum += p.back();
    }
    for (double& x : p) x /= sum;
    return p;
}

inline double log_prob(std::span<const double> theta, const Decision& d) {
    if (d.options.empty() || d.chosen >= d.options.size()) throw std::invalid_argument("decision has no such option");
    const auto z = option_logits(theta, d);
    const double m = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - m);
    return z[d.chosen] - m - std::log(sum);
}

/// Adds scale * d/dtheta log p(chosen) into grad: phi(chosen) - E_p[phi].
inline void accumulate_log_prob_grad(std::span<const double> theta, const Decision& d, double scale,
                                     std::span<double> grad) {
    const auto p = softmax(option_logits(theta, d));
    for (const auto& [i, v] : d.options[d.chosen]) grad[i] += scale * v;
    for (std::size_t o = 0; o < d.options.size(); ++o)
        for (const auto& [i, v] : d.options[o]) grad[i] -= scale * p[o] * v;
}

/// Draws an option index, or takes the argmax (first on ties) when greedy.
inline std::size_t choose(std::span<const double> theta, const std::vector<SparseFeatures>& options, std::mt19937_64& rng,
                          bool greedy) {
    Decision probe{"", options, 0};
    const auto z = option_logits(theta, probe);
    if (greedy) return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
    const auto p = softmax(z);
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        acc += p[i];
        if (u < acc) return i;
    }
    return p.size() - 1;
}

} // namespace framemind
