#pragma once

#include "pcac/params.hpp"

namespace pcac {

// Adam with bias correction; moments kept in double, parameter storage stays
// f32. Gradients are zeroed after each step.
struct OptimizerState {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int64_t step = 0;
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> moments;

    void bind(const ParamStore& store) {
        for (const auto& [id, p] : store.params)
            moments.emplace(id, std::make_pair(std::vector<double>(p.size(), 0.0),
                                               std::vector<double>(p.size(), 0.0)));
    }
};

inline void adam_step(ParamStore& store, OptimizerState& state) {
    state.step += 1;
    double bc1 = 1.0 - std::pow(state.beta1, (double)state.step);
    double bc2 = 1.0 - std::pow(state.beta2, (double)state.step);
    for (auto& [id, p] : store.params) {
        auto it = state.moments.find(id);
        if (it == state.moments.end()) fail(ErrorKind::ShapeMismatch, "optimizer not bound to " + id);
        auto& [m, v] = it->second;
        for (size_t i = 0; i < p.size(); ++i) {
            double g = p.grad[i];
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
            double update = state.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + state.eps);
            p.value[i] = (float)((double)p.value[i] - update);
        }
        std::fill(p.grad.begin(), p.grad.end(), 0.0f);
    }
}

}  // namespace pcac
