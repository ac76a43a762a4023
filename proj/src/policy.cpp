#include "htsrl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "htsrl/buffers.hpp"
#include "htsrl/errors.hpp"

namespace htsrl::policy {

PolicyParams PolicyParams::zeros(std::size_t feature_dim, std::size_t action_count) {
    PolicyParams p;
    p.feature_dim = feature_dim;
    p.action_count = action_count;
    p.weights.assign(feature_dim * action_count, 0.0);
    return p;
}

ValueParams ValueParams::zeros(std::size_t feature_dim) {
    ValueParams v;
    v.weights.assign(feature_dim, 0.0);
    return v;
}

void LearnerHyperparams::validate() const {
    if (!(discount > 0.0 && discount <= 1.0)) {
        throw UsageError("learner: discount must lie in (0, 1]");
    }
    if (nstep < 1) {
        throw UsageError("learner: nstep must be >= 1");
    }
    if (!(entropy_coef >= 0.0)) {
        throw UsageError("learner: entropy_coef must be >= 0");
    }
    if (!(value_coef >= 0.0)) {
        throw UsageError("learner: value_coef must be >= 0");
    }
    // Zero is allowed: it freezes the parameters, which the equivalence
    // checks between engines rely on.
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw UsageError("learner: learning_rate must be finite and >= 0");
    }
}

std::vector<double> softmax(std::span<const double> logits) {
    if (logits.empty()) {
        throw UsageError("softmax: empty logits");
    }
    const double top = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - top);
        total += out[i];
    }
    for (double& p : out) p /= total;
    return out;
}

std::vector<double> policy_forward(const PolicyParams& params, std::span<const double> features) {
    if (features.size() != params.feature_dim ||
        params.weights.size() != params.feature_dim * params.action_count) {
        throw UsageError("policy_forward: dimension mismatch (features " +
                         std::to_string(features.size()) + ", params " +
                         std::to_string(params.feature_dim) + ")");
    }
    std::vector<double> logits(params.action_count, 0.0);
    for (std::size_t f = 0; f < params.feature_dim; ++f) {
        const double x = features[f];
        if (x == 0.0) continue;
        const double* row = params.weights.data() + f * params.action_count;
        for (std::size_t a = 0; a < params.action_count; ++a) {
            logits[a] += x * row[a];
        }
    }
    return softmax(logits);
}

double value_forward(const ValueParams& params, std::span<const double> features) {
    if (features.size() != params.weights.size()) {
        throw UsageError("value_forward: dimension mismatch");
    }
    double v = params.bias;
    for (std::size_t f = 0; f < features.size(); ++f) {
        v += params.weights[f] * features[f];
    }
    return v;
}

int sample_action(std::span<const double> probs, double u) {
    if (probs.empty()) {
        throw UsageError("sample_action: empty distribution");
    }
    double total = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0) || !std::isfinite(p)) {
            throw UsageError("sample_action: probabilities must be finite and >= 0");
        }
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw UsageError("sample_action: probabilities do not sum to 1");
    }
    if (!(u >= 0.0 && u < 1.0)) {
        throw UsageError("sample_action: u must lie in [0, 1)");
    }
    double cumulative = 0.0;
    int last_positive = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        cumulative += probs[i];
        if (probs[i] > 0.0) last_positive = static_cast<int>(i);
        if (cumulative > u && probs[i] > 0.0) {
            return static_cast<int>(i);
        }
    }
    // Rounding left the cumulative sum at or below u.
    return last_positive;
}

double entropy(std::span<const double> probs) {
    double h = 0.0;
    for (double p : probs) {
        if (p > 0.0) h -= p * std::log(p);
    }
    return h;
}

std::vector<double> n_step_returns(std::span<const double> rewards, const std::vector<bool>& dones,
                                   std::span<const double> bootstrap_values, double discount,
                                   int nstep) {
    const std::size_t len = rewards.size();
    if (dones.size() != len || bootstrap_values.size() != len) {
        throw UsageError("n_step_returns: rewards, dones and bootstrap values differ in length");
    }
    if (nstep < 1) {
        throw UsageError("n_step_returns: nstep must be >= 1");
    }
    const auto n = static_cast<std::size_t>(nstep);
    std::vector<double> out(len, 0.0);
    for (std::size_t t = 0; t < len; ++t) {
        double ret = 0.0;
        double weight = 1.0;
        std::size_t k = t;
        bool terminated = false;
        for (std::size_t i = 0; i < n && k < len; ++i, ++k) {
            ret += weight * rewards[k];
            weight *= discount;
            if (dones[k]) {
                terminated = true;
                break;
            }
        }
        if (!terminated) {
            ret += weight * bootstrap_values[k - 1];
        }
        out[t] = ret;
    }
    return out;
}

namespace {

ActorCriticGradient gradient_at(const PolicyParams& policy, const ValueParams& value,
                                const buffers::RolloutStorage& batch,
                                const LearnerHyperparams& hp) {
    if (!batch.complete()) {
        throw UsageError("actor-critic gradient: batch is incomplete (" +
                         std::to_string(batch.size()) + " of " +
                         std::to_string(batch.capacity()) + " transitions)");
    }
    const std::size_t dim = policy.feature_dim;
    const std::size_t actions = policy.action_count;
    if (value.weights.size() != dim) {
        throw UsageError("actor-critic gradient: policy and value feature dims differ");
    }

    ActorCriticGradient grad;
    grad.policy.feature_dim = dim;
    grad.policy.action_count = actions;
    grad.policy.weights.assign(dim * actions, 0.0);
    grad.value.weights.assign(dim, 0.0);

    const std::size_t window = batch.interval();
    std::vector<double> rewards(window);
    std::vector<bool> dones(window);
    std::vector<double> bootstrap(window);
    std::vector<double> state_values(window);
    std::vector<double> logit_grad(actions);

    for (std::size_t e = 0; e < batch.n_envs(); ++e) {
        const int env = static_cast<int>(e);
        if (!batch.has_bootstrap(env)) {
            throw UsageError("actor-critic gradient: env " + std::to_string(e) +
                             " has no bootstrap state");
        }
        for (std::size_t t = 0; t < window; ++t) {
            const buffers::Transition& tr = batch.at(env, t);
            rewards[t] = tr.reward;
            dones[t] = tr.done;
            state_values[t] = value_forward(value, tr.features);
        }
        for (std::size_t t = 0; t + 1 < window; ++t) {
            bootstrap[t] = state_values[t + 1];
        }
        bootstrap[window - 1] = value_forward(value, batch.bootstrap(env));
        const std::vector<double> targets =
            n_step_returns(rewards, dones, bootstrap, hp.discount, hp.nstep);

        for (std::size_t t = 0; t < window; ++t) {
            const buffers::Transition& tr = batch.at(env, t);
            if (tr.action < 0 || static_cast<std::size_t>(tr.action) >= actions) {
                throw UsageError("actor-critic gradient: logged action out of range");
            }
            const std::vector<double> probs = policy_forward(policy, tr.features);
            const double advantage = targets[t] - state_values[t];
            const double h = entropy(probs);
            for (std::size_t a = 0; a < actions; ++a) {
                const double p = probs[a];
                const double score = (static_cast<int>(a) == tr.action ? 1.0 : 0.0) - p;
                const double dentropy = p > 0.0 ? -p * (std::log(p) + h) : 0.0;
                logit_grad[a] = advantage * score + hp.entropy_coef * dentropy;
            }
            const double dvalue = -2.0 * hp.value_coef * advantage;
            for (std::size_t f = 0; f < dim; ++f) {
                const double x = tr.features[f];
                if (x == 0.0) continue;
                double* row = grad.policy.weights.data() + f * actions;
                for (std::size_t a = 0; a < actions; ++a) {
                    row[a] += x * logit_grad[a];
                }
                grad.value.weights[f] += dvalue * x;
            }
            grad.value.bias += dvalue;
        }
    }

    const double scale = 1.0 / static_cast<double>(batch.capacity());
    for (double& g : grad.policy.weights) g *= scale;
    for (double& g : grad.value.weights) g *= scale;
    grad.value.bias *= scale;
    return grad;
}

void require_finite(std::span<const double> values, const char* what) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string("apply_update: non-finite ") + what + " gradient entry");
        }
    }
}

}  // namespace

ActorCriticGradient actor_critic_gradient(const PolicyParams& policy, const ValueParams& value,
                                          const buffers::RolloutStorage& batch,
                                          const LearnerHyperparams& hp) {
    if (!batch.snapshot() || batch.snapshot()->version() != policy.version) {
        throw UsageError("actor_critic_gradient: parameters are not the batch's behavior parameters");
    }
    return gradient_at(policy, value, batch, hp);
}

ActorCriticGradient stale_gradient(const PolicyParams& current_policy,
                                   const ValueParams& current_value,
                                   const buffers::RolloutStorage& stale_batch,
                                   const LearnerHyperparams& hp) {
    return gradient_at(current_policy, current_value, stale_batch, hp);
}

PolicyParams apply_update(const PolicyParams& target, const PolicyGradient& grad,
                          double learning_rate) {
    if (grad.weights.size() != target.weights.size() || grad.feature_dim != target.feature_dim ||
        grad.action_count != target.action_count) {
        throw UsageError("apply_update: policy gradient shape mismatch");
    }
    require_finite(grad.weights, "policy");
    PolicyParams next = target;
    for (std::size_t i = 0; i < next.weights.size(); ++i) {
        next.weights[i] += learning_rate * grad.weights[i];
    }
    ++next.version;
    return next;
}

ValueParams apply_update(const ValueParams& target, const ValueGradient& grad,
                         double learning_rate) {
    if (grad.weights.size() != target.weights.size()) {
        throw UsageError("apply_update: value gradient shape mismatch");
    }
    require_finite(grad.weights, "value");
    require_finite(std::span<const double>(&grad.bias, 1), "value");
    ValueParams next = target;
    for (std::size_t i = 0; i < next.weights.size(); ++i) {
        next.weights[i] -= learning_rate * grad.weights[i];
    }
    next.bias -= learning_rate * grad.bias;
    ++next.version;
    return next;
}

double l2_norm(const PolicyGradient& grad) {
    return std::sqrt(std::inner_product(grad.weights.begin(), grad.weights.end(),
                                        grad.weights.begin(), 0.0));
}

}  // namespace htsrl::policy
