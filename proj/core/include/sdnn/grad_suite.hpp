#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sdnn {

struct GradSuiteRow {
    std::string name;
    std::size_t instances = 0;
    std::size_t coordinates = 0;
    std::size_t skipped_kinks = 0;
    float relative_error = 0.0f;     // worst norm-wise error over checks
    float max_relative_error = 0.0f; // worst single coordinate
};

/// Every differentiable op, each input checked on `instances` random shapes.
std::vector<GradSuiteRow> op_gradient_suite(std::uint64_t seed, std::size_t instances);

/// Train loss of a small noisy three-head model on a 4-sample batch, checked
/// against every parameter tensor.
GradSuiteRow end_to_end_gradient_suite(std::uint64_t seed, std::size_t instances);

} // namespace sdnn
