#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "linkedrnn/errors.hpp"
#include "linkedrnn/matrix.hpp"
#include "linkedrnn/rng.hpp"

namespace linkedrnn {

/// Named view of one trainable matrix. The registry fixes a canonical
/// parameter order shared by the optimizer, checkpoints and gradient checks.
struct ParamRef {
    std::string name;
    Matrix* value;
};

using ParamRegistry = std::vector<ParamRef>;

inline void register_param(ParamRegistry& registry, std::string name, Matrix& value) {
    for (const ParamRef& p : registry)
        if (p.name == name)
            throw ContractError("parameter registered twice: " + name);
    registry.push_back({std::move(name), &value});
}

/// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
inline Matrix init_weight(std::size_t rows, std::size_t cols, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    return Matrix::uniform(rows, cols, -bound, bound, rng);
}

} // namespace linkedrnn
