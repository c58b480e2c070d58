#pragma once

#include "sdnn/tensor.hpp"

#include <functional>
#include <string>
#include <vector>

namespace sdnn {

using ScalarFn = std::function<Tensor(const Tensor&)>;

enum class Stencil {
    central,   // (f(x+h) − f(x−h)) / 2h
    five_point // (8(f(x+h/2) − f(x−h/2)) − (f(x+h) − f(x−h))) / 6h
};

struct GradCheckOptions {
    float step = 1e-3f;
    Stencil stencil = Stencil::central;
    /// Skip coordinates where some evaluation point takes a different branch
    /// of a relu or max pool than the unperturbed input: the finite difference
    /// straddles a kink there.
    bool skip_kinks = false;
    /// Lower bound of the relative-error denominator. Gradients smaller than
    /// this are effectively compared on an absolute scale.
    float magnitude_floor = 1e-8f;
    /// Check at most this many coordinates (evenly strided); 0 checks all.
    std::size_t max_coordinates = 0;
};

struct GradCheckResult {
    /// ‖analytic − numeric‖₂ / max(‖analytic‖₂, ‖numeric‖₂, 1e-8) over the
    /// checked coordinates.
    float relative_error = 0.0f;
    /// Worst coordinate-wise relative_error().
    float max_relative_error = 0.0f;
    std::size_t worst_index = 0;
    std::size_t checked = 0;
    std::size_t skipped_kinks = 0;
    std::vector<float> analytic;
    std::vector<float> numeric;
};

/// |a − b| / max(|a|, |b|, floor).
float relative_error(float analytic, float numeric, float floor = 1e-8f);

/// Compares the tape gradient of scalar-valued `f` at `x` against central
/// differences (f(x+h·e) − f(x−h·e)) / 2h for each coordinate.
GradCheckResult grad_check(const ScalarFn& f, const Tensor& x, const GradCheckOptions& options = {});

/// Convenience overload returning only the maximum relative error.
float grad_check(const ScalarFn& f, const Tensor& x, float h);

/// Checks the gradient of a scalar function with respect to an existing
/// parameter tensor that `loss` closes over. The parameter's data is perturbed
/// in place and restored.
GradCheckResult grad_check_parameter(const std::function<Tensor()>& loss, Tensor& parameter,
                                     const GradCheckOptions& options = {});

} // namespace sdnn
