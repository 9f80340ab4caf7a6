// SPDX-License-Identifier: Apache-2.0
#pragma once

// Group-relative policy optimisation over ladder groups.
//
//   J = mean_batches[ (1/G) sum_g sum_t min(r_t A_g, clip(r_t, 1-eps, 1+eps) A_g) ] - beta * mean_t KL_t
//
// r_t is the per-decision ratio against the snapshot taken before the step,
// A_g the trajectory's group-relative advantage (broadcast to all of its
// decisions), and KL_t the low-variance estimate rho - log rho - 1 with
// rho = pi_ref / pi_theta at decision t.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "framemind/advantage.hpp"
#include "framemind/decision.hpp"
#include "framemind/rollout.hpp"

namespace framemind {

template <typename P>
concept TrainablePolicy = requires(P& p, const P& cp, const std::string& text, const EvidenceWindow& w,
                                   std::span<const double> theta) {
    { cp.parameters() } -> std::convertible_to<std::span<const double>>;
    p.set_parameters(theta);
    { cp.decisions(text, w, text) } -> std::same_as<std::vector<Decision>>;
};

class PolicySnapshot {
public:
    enum class Role { old, reference };

    PolicySnapshot(std::span<const double> params, Role role) : params_(params.begin(), params.end()), role_(role) {}

    template <TrainablePolicy P>
    static PolicySnapshot capture(const P& policy, Role role) {
        return PolicySnapshot(policy.parameters(), role);
    }

    std::span<const double> parameters() const { return params_; }
    Role role() const { return role_; }

private:
    std::vector<double> params_;
    Role role_;
};

struct TrainConfig {
    double clip_epsilon = 0.2;
    double kl_coef = 1e-3;
    double learning_rate = 0.05;
    double max_grad_norm = 1.0;
    int group_size = 8;
    int max_turns = 3;
};

inline double clipped_term(double ratio, double advantage, double eps) {
    return std::min(ratio * advantage, std::clamp(ratio, 1.0 - eps, 1.0 + eps) * advantage);
}

inline double kl_low_var(double logp_current, double logp_reference) {
    // expm1 keeps small gaps from cancelling to exactly zero.
    const double diff = logp_reference - logp_current;
    return std::expm1(diff) - diff;
}

/// One recorded decision with everything the objective needs besides theta.
struct DecisionTerm {
    Decision decision;
    double advantage = 0.0;
    double weight = 0.0; // 1 / (G * number of batches)
    double logp_old = 0.0;
    double logp_ref = 0.0;
};

/// Re-derives every decision of every surviving trajectory from its text.
template <TrainablePolicy P>
std::vector<DecisionTerm> collect_terms(std::span<const GroupBatch> batches, const P& policy,
                                        const PolicySnapshot& old, const PolicySnapshot& ref) {
    std::size_t valid = 0;
    for (const auto& b : batches) valid += b.is_void() ? 0 : 1;
    if (valid == 0) throw BatchVoidError("no valid batch to train on");

    std::vector<DecisionTerm> terms;
    for (const auto& batch : batches) {
        if (batch.is_void()) continue;
        if (batch.advantages.size() != batch.trajectories.size())
            throw BatchVoidError("batch " + batch.question_id + " has no advantages");
        const double weight = 1.0 / (static_cast<double>(batch.trajectories.size()) * static_cast<double>(valid));
        for (std::size_t g = 0; g < batch.trajectories.size(); ++g) {
            const Trajectory& traj = batch.trajectories[g];
            for (const Turn& turn : traj.turns) {
                std::vector<Decision> ds;
                try {
                    ds = policy.decisions(turn.prompt, traj.window_before(turn.index), turn.output.raw);
                } catch (const std::exception& e) {
                    throw BatchVoidError("missing log-probs in " + batch.question_id + ": " + e.what());
                }
                for (auto& d : ds) {
                    DecisionTerm t;
                    t.advantage = batch.advantages[g];
                    t.weight = weight;
                    t.logp_old = log_prob(old.parameters(), d);
                    t.logp_ref = log_prob(ref.parameters(), d);
                    t.decision = std::move(d);
                    terms.push_back(std::move(t));
                }
            }
        }
    }
    return terms;
}

struct SurrogateValue {
    double objective = 0.0;
    double policy_term = 0.0;
    double mean_kl = 0.0;
    double clip_fraction = 0.0;
    std::vector<double> gradient;
};

inline SurrogateValue evaluate_surrogate(std::span<const DecisionTerm> terms, std::span<const double> theta,
                                         double eps, double beta, bool with_gradient = true) {
    SurrogateValue out;
    if (with_gradient) out.gradient.assign(theta.size(), 0.0);
    if (terms.empty()) return out;
    const double inv_m = 1.0 / static_cast<double>(terms.size());
    std::size_t clipped = 0;
    for (const auto& t : terms) {
        const double lp = log_prob(theta, t.decision);
        const double ratio = std::exp(lp - t.logp_old);
        const double unclipped = ratio * t.advantage;
        const double value = clipped_term(ratio, t.advantage, eps);
        out.policy_term += t.weight * value;
        const bool clip_active = unclipped > value;
        clipped += clip_active ? 1 : 0;
        out.mean_kl += inv_m * kl_low_var(lp, t.logp_ref);
        if (!with_gradient) continue;
        // d min(.)/d lp: the unclipped branch carries ratio * A; the clipped one is flat.
        double dlp = clip_active ? 0.0 : t.weight * t.advantage * ratio;
        // d KL/d lp = 1 - rho, rho = exp(lp_ref - lp).
        dlp += beta * inv_m * std::expm1(t.logp_ref - lp);
        if (dlp != 0.0) accumulate_log_prob_grad(theta, t.decision, dlp, out.gradient);
    }
    out.clip_fraction = static_cast<double>(clipped) * inv_m;
    out.objective = out.policy_term - beta * out.mean_kl;
    return out;
}

template <TrainablePolicy P>
double surrogate_objective(std::span<const GroupBatch> batches, const P& policy, const PolicySnapshot& old,
                           const PolicySnapshot& ref, const TrainConfig& cfg) {
    const auto terms = collect_terms(batches, policy, old, ref);
    return evaluate_surrogate(terms, policy.parameters(), cfg.clip_epsilon, cfg.kl_coef, false).objective;
}

struct UpdateStats {
    double objective = 0.0;
    double mean_kl = 0.0;
    double clip_fraction = 0.0;
    double grad_norm = 0.0;
    bool skipped = false;
    std::size_t decisions = 0;
    double mean_reward = 0.0;
    double mean_acc = 0.0;
    double mean_format = 0.0;
    double mean_tool_reward = 0.0;
    double mean_turn_reward = 0.0;
    double mean_turns = 0.0;
};

inline void fill_reward_means(std::span<const GroupBatch> batches, UpdateStats& s) {
    std::size_t n = 0;
    for (const auto& b : batches) {
        if (b.is_void()) continue;
        for (const auto& t : b.trajectories) {
            if (!t.reward) continue;
            ++n;
            s.mean_reward += t.reward->total;
            s.mean_acc += t.reward->acc;
            s.mean_format += t.reward->format;
            s.mean_tool_reward += t.reward->tool;
            s.mean_turn_reward += t.reward->turn;
            s.mean_turns += static_cast<double>(t.turns.size());
        }
    }
    if (n == 0) return;
    const double inv = 1.0 / static_cast<double>(n);
    for (double* v : {&s.mean_reward, &s.mean_acc, &s.mean_format, &s.mean_tool_reward, &s.mean_turn_reward,
                      &s.mean_turns})
        *v *= inv;
}

/// One gradient-ascent step on the surrogate. The old-policy snapshot is
/// taken here, right before the step; `ref` stays fixed for the whole run.
template <TrainablePolicy P>
UpdateStats update(P& policy, std::span<const GroupBatch> batches, const PolicySnapshot& ref, const TrainConfig& cfg) {
    const PolicySnapshot old = PolicySnapshot::capture(policy, PolicySnapshot::Role::old);
    const auto terms = collect_terms(batches, policy, old, ref);
    const auto theta = old.parameters();
    SurrogateValue v = evaluate_surrogate(terms, theta, cfg.clip_epsilon, cfg.kl_coef);

    UpdateStats s;
    s.objective = v.objective;
    s.mean_kl = v.mean_kl;
    s.clip_fraction = v.clip_fraction;
    s.decisions = terms.size();
    fill_reward_means(batches, s);

    double norm2 = 0.0;
    for (double g : v.gradient) norm2 += g * g;
    s.grad_norm = std::sqrt(norm2);
    if (!std::isfinite(s.grad_norm)) {
        s.skipped = true;
        log::warning("non-finite gradient; update skipped");
        return s;
    }
    const double scale = (cfg.max_grad_norm > 0.0 && s.grad_norm > cfg.max_grad_norm) ? cfg.max_grad_norm / s.grad_norm
                                                                                         : 1.0;
    std::vector<double> next(theta.begin(), theta.end());
    for (std::size_t i = 0; i < next.size(); ++i) next[i] += cfg.learning_rate * scale * v.gradient[i];
    policy.set_parameters(next);
    return s;
}

inline nlohmann::json metrics_record(std::size_t step, const UpdateStats& s) {
    return nlohmann::json{{"step", step},
                          {"objective", s.objective},
                          {"kl", s.mean_kl},
                          {"clip_fraction", s.clip_fraction},
                          {"grad_norm", s.grad_norm},
                          {"skipped", s.skipped},
                          {"mean_reward", s.mean_reward},
                          {"mean_acc", s.mean_acc},
                          {"mean_format", s.mean_format},
                          {"mean_tool_reward", s.mean_tool_reward},
                          {"mean_turn_reward", s.mean_turn_reward},
                          {"mean_turns", s.mean_turns}};
}

} // namespace framemind
