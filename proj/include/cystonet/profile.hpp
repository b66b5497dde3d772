#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cystonet/model.hpp"

namespace cysto {

struct ProfileEntry {
    std::string name;
    std::string group;  // baseline | dag_gates | transformer
    std::int64_t params = 0;
    std::int64_t macs = 0;
};

struct ProfileReport {
    std::vector<ProfileEntry> entries;

    std::int64_t total_params() const;
    std::int64_t total_macs() const;
    std::int64_t group_params(const std::string& group) const;
    std::int64_t group_macs(const std::string& group) const;

    /// Flat "key = value" lines: per-entry rows, group totals, grand totals,
    /// and GFLOPs under both conventions (MACs and 2*MACs).
    std::string to_text() const;
};

/// Learnable-scalar counts by exact enumeration; multiply-accumulate counts
/// by analytic per-op formulas at the configured input size (convolution and
/// matrix-product MACs only; normalization/activation/resampling excluded).
ProfileReport profile_model(const Model& m);

}  // namespace cysto
