// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 milpool authors

#include "milpool/types.hpp"

#include <sstream>

namespace milpool {

const char* pooling_function_name(PoolingFunction fn) {
    switch (fn) {
        case PoolingFunction::kMax: return "max";
        case PoolingFunction::kAverage: return "average";
        case PoolingFunction::kLinearSoftmax: return "linear";
        case PoolingFunction::kExponentialSoftmax: return "exponential";
        case PoolingFunction::kAttention: return "attention";
    }
    return "unknown";
}

PoolingFunction pooling_function_from_name(const std::string& name) {
    if (name == "max") return PoolingFunction::kMax;
    if (name == "average" || name == "avg") return PoolingFunction::kAverage;
    if (name == "linear") return PoolingFunction::kLinearSoftmax;
    if (name == "exponential" || name == "exp") return PoolingFunction::kExponentialSoftmax;
    if (name == "attention") return PoolingFunction::kAttention;
    throw ConfigError("unknown pooling function: '" + name + "'");
}

std::string StagePlan::to_string() const {
    if (factors.empty()) return "flat";
    std::ostringstream out;
    for (std::size_t i = 0; i < factors.size(); ++i) {
        if (i) out << 'x';
        out << factors[i];
    }
    return out.str();
}

StagePlan StagePlan::parse(const std::string& text) {
    StagePlan plan;
    if (text.empty() || text == "flat" || text == "single") return plan;
    std::string token;
    std::istringstream in(text);
    while (std::getline(in, token, 'x')) {
        try {
            std::size_t used = 0;
            int factor = std::stoi(token, &used);
            if (used != token.size() || factor <= 0)
                throw ConfigError("bad stage factor '" + token + "' in plan '" + text + "'");
            plan.factors.push_back(factor);
        } catch (const std::logic_error&) {
            throw ConfigError("bad stage factor '" + token + "' in plan '" + text + "'");
        }
    }
    if (plan.factors.empty())
        throw ConfigError("empty stage plan '" + text + "'");
    return plan;
}

}  // namespace milpool
