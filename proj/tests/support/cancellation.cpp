#include "cancellation.hpp"

#include "sdnn/noise.hpp"
#include "sdnn/ops.hpp"

#include <algorithm>
#include <cmath>

namespace sdnn::testing {

CancellationResult cancellation_experiment(std::size_t hw, std::size_t channels, std::size_t outputs, float sigma,
                                           std::size_t trials, std::uint64_t seed)
{
    const Rng root(seed);
    Rng init = root.child(0);
    std::vector<float> phi(channels * outputs);
    for (float& v : phi) {
        v = init.normal() / std::sqrt(static_cast<float>(channels));
    }
    double row_norm = 0.0;
    for (std::size_t o = 0; o < outputs; ++o) {
        double ss = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
            ss += double(phi[c * outputs + o]) * phi[c * outputs + o];
        }
        row_norm = std::max(row_norm, std::sqrt(ss));
    }
    const Tensor kernel(Shape{1, 1, channels, outputs}, phi);
    std::vector<float> f(hw * hw * channels);
    for (float& v : f) {
        v = init.normal();
    }
    const Tensor features(Shape{1, hw, hw, channels}, f);
    auto block = [&](const Tensor& x) { return pool2d(conv2d(x, kernel, 1, 0), PoolMode::avg, 1, 1); };

    NoGradGuard no_grad;
    const Tensor clean = block(features);
    CancellationResult result;
    for (bool spatial : {true, false}) {
        const NoiseSpec spec = NoiseSpec::gaussian(sigma, spatial);
        double total = 0.0;
        for (std::size_t t = 0; t < trials; ++t) {
            const Tensor noisy = block(apply_noise(features, spec, root.child({1, t}), true));
            for (std::size_t o = 0; o < outputs; ++o) {
                total += std::fabs(noisy.data()[o] - clean.data()[o]);
            }
        }
        const double mean = total / static_cast<double>(trials * outputs);
        (spatial ? result.spatial_deviation : result.nonspatial_deviation) = mean;
    }
    result.bound = 3.0 * sigma * row_norm / static_cast<double>(hw);
    return result;
}

} // namespace sdnn::testing
