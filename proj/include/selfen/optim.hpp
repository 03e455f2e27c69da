#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "selfen/tensor.hpp"

namespace selfen {

template <typename T>
using NamedParams = std::vector<std::pair<std::string, BasicTensor<T>>>;

struct AdamOptions {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Per-parameter moment estimates.
struct AdamState {
    std::vector<float> m;
    std::vector<float> v;
};

// Bias-corrected Adam over a fixed parameter set.
class Adam {
 public:
    explicit Adam(std::vector<Tensor> params, AdamOptions options = {});

    // Applies one update with learning rate `lr`, then clears every grad.
    // Throws GraphError if a parameter has no gradient.
    void step(double lr);

    std::uint64_t steps() const { return t_; }
    const std::vector<AdamState>& states() const { return states_; }
    const AdamOptions& options() const { return options_; }

 private:
    std::vector<Tensor> params_;
    std::vector<AdamState> states_;
    AdamOptions options_;
    std::uint64_t t_ = 0;
};

}  // namespace selfen
