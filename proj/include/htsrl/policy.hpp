#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace htsrl::buffers {
class RolloutStorage;
}

namespace htsrl::policy {

/// Linear-softmax policy weights, row-major [feature][action].
struct PolicyParams {
    std::size_t feature_dim = 0;
    std::size_t action_count = 0;
    std::vector<double> weights;
    std::int64_t version = 0;

    static PolicyParams zeros(std::size_t feature_dim, std::size_t action_count);

    double& at(std::size_t feature, std::size_t action) {
        return weights[feature * action_count + action];
    }
    double at(std::size_t feature, std::size_t action) const {
        return weights[feature * action_count + action];
    }

    friend bool operator==(const PolicyParams&, const PolicyParams&) = default;
};

/// Linear state-value function.
struct ValueParams {
    std::vector<double> weights;
    double bias = 0.0;
    std::int64_t version = 0;

    static ValueParams zeros(std::size_t feature_dim);

    friend bool operator==(const ValueParams&, const ValueParams&) = default;
};

struct LearnerHyperparams {
    double discount = 0.99;
    int nstep = 5;
    double entropy_coef = 0.01;
    double value_coef = 0.5;
    double learning_rate = 1.0;

    void validate() const;
    friend bool operator==(const LearnerHyperparams&, const LearnerHyperparams&) = default;
};

struct PolicyGradient {
    std::size_t feature_dim = 0;
    std::size_t action_count = 0;
    std::vector<double> weights;

    double at(std::size_t feature, std::size_t action) const {
        return weights[feature * action_count + action];
    }
    friend bool operator==(const PolicyGradient&, const PolicyGradient&) = default;
};

struct ValueGradient {
    std::vector<double> weights;
    double bias = 0.0;
    friend bool operator==(const ValueGradient&, const ValueGradient&) = default;
};

struct ActorCriticGradient {
    PolicyGradient policy;
    ValueGradient value;
    friend bool operator==(const ActorCriticGradient&, const ActorCriticGradient&) = default;
};

std::vector<double> softmax(std::span<const double> logits);
std::vector<double> policy_forward(const PolicyParams& params, std::span<const double> features);
double value_forward(const ValueParams& params, std::span<const double> features);

/// Inverse-CDF sampling: smallest i whose cumulative probability exceeds u.
int sample_action(std::span<const double> probs, double u);

double entropy(std::span<const double> probs);

/// n-step truncated returns over one environment's window.
///
/// bootstrap_values[t] is V(s_{t+1}), the value of the state observed after
/// step t. A done flag at step t ends the sum there and drops the bootstrap;
/// otherwise the window end is bootstrapped from the last observed state.
std::vector<double> n_step_returns(std::span<const double> rewards, const std::vector<bool>& dones,
                                   std::span<const double> bootstrap_values, double discount,
                                   int nstep);

/// Actor-critic gradient on a complete batch evaluated at the parameters that
/// generated it. Throws UsageError if the batch's behavior version differs
/// from `policy.version`.
///
/// The policy block is an ascent direction (advantage held constant); the
/// value block is the gradient of value_coef * mean squared error with the
/// n-step targets held constant.
ActorCriticGradient actor_critic_gradient(const PolicyParams& policy, const ValueParams& value,
                                          const buffers::RolloutStorage& batch,
                                          const LearnerHyperparams& hp);

/// Same estimator evaluated at parameters that did not generate `batch`.
ActorCriticGradient stale_gradient(const PolicyParams& current_policy,
                                   const ValueParams& current_value,
                                   const buffers::RolloutStorage& stale_batch,
                                   const LearnerHyperparams& hp);

/// theta + lr * grad, version + 1. NumericError on non-finite gradient.
PolicyParams apply_update(const PolicyParams& target, const PolicyGradient& grad,
                          double learning_rate);
/// phi - lr * grad, version + 1. NumericError on non-finite gradient.
ValueParams apply_update(const ValueParams& target, const ValueGradient& grad,
                         double learning_rate);

double l2_norm(const PolicyGradient& grad);

}  // namespace htsrl::policy
