#pragma once

#include <cmath>
#include <vector>

#include "avp/error.hpp"

namespace avp {

struct AdamConfig {
    double learning_rate = 5e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    std::vector<double> m;  // first moment
    std::vector<double> v;  // second moment
    long step = 0;

    void init(size_t n) {
        m.assign(n, 0.0);
        v.assign(n, 0.0);
        step = 0;
    }
};

// Standard bias-corrected update; deterministic given state and gradients.
inline void adam_step(std::vector<double>& params, const std::vector<double>& grads,
                      AdamState& state, const AdamConfig& config) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw Error(ErrorKind::Usage, "adam_step size mismatch");
    state.step += 1;
    const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
    for (size_t i = 0; i < params.size(); ++i) {
        double g = grads[i];
        state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
        state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
        double mhat = state.m[i] / c1;
        double vhat = state.v[i] / c2;
        params[i] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.epsilon);
    }
}

}  // namespace avp
