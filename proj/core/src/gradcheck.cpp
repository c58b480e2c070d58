#include "sdnn/gradcheck.hpp"

#include "sdnn/error.hpp"

#include <algorithm>
#include <cmath>

namespace sdnn {

float relative_error(float analytic, float numeric, float floor)
{
    const float denom = std::max({std::fabs(analytic), std::fabs(numeric), floor});
    return std::fabs(analytic - numeric) / denom;
}

GradCheckResult grad_check_parameter(const std::function<Tensor()>& loss, Tensor& parameter,
                                     const GradCheckOptions& options)
{
    if (!(options.step > 0.0f)) {
        throw ValueError("grad_check: step must be positive");
    }
    const bool had_requires_grad = parameter.requires_grad();
    parameter.set_requires_grad(true);
    parameter.zero_grad();
    {
        Tensor value = loss();
        if (value.numel() != 1) {
            throw ShapeError("grad_check: function must be scalar-valued, got " +
                             shape_string(value.shape()));
        }
        backward(value);
    }
    GradCheckResult result;
    const std::size_t n = parameter.numel();
    std::vector<float> analytic = parameter.has_grad()
                                      ? std::vector<float>(parameter.grad().begin(), parameter.grad().end())
                                      : std::vector<float>(n, 0.0f);

    const std::size_t stride =
        (options.max_coordinates == 0 || options.max_coordinates >= n) ? 1 : n / options.max_coordinates;
    const float h = options.step;
    auto values = parameter.mutable_data();
    NoGradGuard no_grad;

    // Evaluates the loss with coordinate i shifted by `delta`; records the
    // branch signature when kinks are being skipped.
    std::uint64_t base_signature = 0;
    bool crossed = false;
    auto eval = [&](std::size_t i, float delta) {
        const float original = values[i];
        values[i] = original + delta;
        float v;
        if (options.skip_kinks) {
            detail::KinkTrace trace;
            v = loss().item();
            crossed = crossed || trace.signature() != base_signature;
        } else {
            v = loss().item();
        }
        values[i] = original;
        return v;
    };
    if (options.skip_kinks) {
        detail::KinkTrace trace;
        loss();
        base_signature = trace.signature();
    }

    for (std::size_t i = 0; i < n; i += stride) {
        crossed = false;
        const float d1 = eval(i, h) - eval(i, -h);
        float numeric = d1 / (2.0f * h);
        if (options.stencil == Stencil::five_point) {
            const float d2 = eval(i, h / 2) - eval(i, -h / 2);
            numeric = (8.0f * d2 - d1) / (6.0f * h);
        }
        if (crossed) {
            ++result.skipped_kinks;
            continue;
        }
        const float err = relative_error(analytic[i], numeric, options.magnitude_floor);
        if (result.checked == 0 || err > result.max_relative_error) {
            result.max_relative_error = err;
            result.worst_index = i;
        }
        result.analytic.push_back(analytic[i]);
        result.numeric.push_back(numeric);
        ++result.checked;
    }
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t k = 0; k < result.checked; ++k) {
        const double a = result.analytic[k], num = result.numeric[k];
        diff2 += (a - num) * (a - num);
        a2 += a * a;
        n2 += num * num;
    }
    result.relative_error =
        static_cast<float>(std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(n2), 1e-8}));
    parameter.zero_grad();
    parameter.set_requires_grad(had_requires_grad);
    return result;
}

GradCheckResult grad_check(const ScalarFn& f, const Tensor& x, const GradCheckOptions& options)
{
    Tensor input = x.clone();
    return grad_check_parameter([&] { return f(input); }, input, options);
}

float grad_check(const ScalarFn& f, const Tensor& x, float h)
{
    GradCheckOptions options;
    options.step = h;
    return grad_check(f, x, options).max_relative_error;
}

} // namespace sdnn
