#include "selfen/optim.hpp"

#include <cmath>

#include "selfen/error.hpp"

namespace selfen {

Adam::Adam(std::vector<Tensor> params, AdamOptions options) : params_(std::move(params)), options_(options) {
    states_.reserve(params_.size());
    for (const auto& p : params_) {
        if (!p.is_leaf() || !p.requires_grad()) throw GraphError("Adam: parameters must be requires_grad leaves");
        states_.push_back({std::vector<float>(p.numel(), 0.0f), std::vector<float>(p.numel(), 0.0f)});
    }
}

void Adam::step(double lr) {
    if (!(lr > 0.0)) throw ConfigError("Adam: learning rate must be positive");
    for (const auto& p : params_)
        if (!p.has_grad()) throw GraphError("Adam: parameter without gradient (was backward called?)");

    ++t_;
    const double b1 = options_.beta1, b2 = options_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& p = params_[i];
        auto& st = states_[i];
        auto value = p.mutable_data();
        const auto grad = p.grad();
        for (std::size_t j = 0; j < value.size(); ++j) {
            const double g = grad[j];
            const double m = b1 * st.m[j] + (1.0 - b1) * g;
            const double v = b2 * st.v[j] + (1.0 - b2) * g * g;
            st.m[j] = static_cast<float>(m);
            st.v[j] = static_cast<float>(v);
            const double mhat = m / c1;
            const double vhat = v / c2;
            value[j] = static_cast<float>(value[j] - lr * mhat / (std::sqrt(vhat) + options_.eps));
        }
        p.zero_grad();
    }
}

}  // namespace selfen
