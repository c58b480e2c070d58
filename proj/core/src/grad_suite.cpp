#include "sdnn/grad_suite.hpp"

#include "sdnn/gradcheck.hpp"
#include "sdnn/model.hpp"
#include "sdnn/ops.hpp"
#include "sdnn/rng.hpp"

#include <algorithm>
#include <functional>

namespace sdnn {

namespace {

Tensor random_tensor(Shape shape, Rng& rng, float lo, float hi)
{
    std::vector<float> data(shape_numel(shape));
    for (float& v : data) {
        v = lo + (hi - lo) * rng.uniform();
    }
    return Tensor(std::move(shape), std::move(data));
}

// Scalar probe: Σ y ⊙ R with fixed random R, so every output element gets a
// distinct upstream gradient.
Tensor probe(const Tensor& y, const Tensor& weights) { return sum(mul(y, weights)); }

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); }

struct Recorder {
    GradSuiteRow row;

    void check(const std::function<Tensor()>& loss, Tensor& param, const GradCheckOptions& options)
    {
        const GradCheckResult r = grad_check_parameter(loss, param, options);
        row.coordinates += r.checked;
        row.skipped_kinks += r.skipped_kinks;
        row.relative_error = std::max(row.relative_error, r.relative_error);
        row.max_relative_error = std::max(row.max_relative_error, r.max_relative_error);
    }
};

GradCheckOptions linear_options()
{
    // Linear in the checked input: the central difference is exact up to
    // rounding, so a large step keeps rounding small.
    GradCheckOptions o;
    o.step = 0.25f;
    return o;
}

GradCheckOptions smooth_options()
{
    GradCheckOptions o;
    o.step = 0.03f;
    o.stencil = Stencil::five_point;
    return o;
}

GradCheckOptions kinked_options()
{
    GradCheckOptions o = smooth_options();
    o.skip_kinks = true;
    return o;
}

using Case = std::function<void(Rng&, Recorder&)>;

std::vector<std::pair<std::string, Case>> op_cases()
{
    std::vector<std::pair<std::string, Case>> cases;

    cases.emplace_back("add", [](Rng& rng, Recorder& rec) {
        const Shape s{pick(rng, 1, 3), pick(rng, 1, 5)};
        Tensor a = random_tensor(s, rng, -1, 1), b = random_tensor(s, rng, -1, 1), w = random_tensor(s, rng, 0.5f, 1.5f);
        rec.check([&] { return probe(add(a, b), w); }, a, linear_options());
        rec.check([&] { return probe(add(a, b), w); }, b, linear_options());
    });
    cases.emplace_back("mul", [](Rng& rng, Recorder& rec) {
        const Shape s{pick(rng, 1, 3), pick(rng, 1, 5)};
        Tensor a = random_tensor(s, rng, 0.5f, 2), b = random_tensor(s, rng, 0.5f, 2), w = random_tensor(s, rng, 0.5f, 1.5f);
        rec.check([&] { return probe(mul(a, b), w); }, a, linear_options());
        rec.check([&] { return probe(mul(a, b), w); }, b, linear_options());
    });
    cases.emplace_back("broadcast_add_channel", [](Rng& rng, Recorder& rec) {
        const std::size_t n = pick(rng, 1, 3), c = pick(rng, 1, 4);
        const Shape s{n, pick(rng, 1, 4), pick(rng, 1, 4), c};
        Tensor a = random_tensor(s, rng, -1, 1), w = random_tensor(s, rng, 0.5f, 1.5f);
        Tensor shared = random_tensor(Shape{c}, rng, -1, 1);
        Tensor per_sample = random_tensor(Shape{n, c}, rng, -1, 1);
        rec.check([&] { return probe(broadcast_add_channel(a, shared), w); }, a, linear_options());
        rec.check([&] { return probe(broadcast_add_channel(a, shared), w); }, shared, linear_options());
        rec.check([&] { return probe(broadcast_add_channel(a, per_sample), w); }, per_sample, linear_options());
    });
    cases.emplace_back("scale", [](Rng& rng, Recorder& rec) {
        const Shape s{pick(rng, 1, 4), pick(rng, 1, 4)};
        Tensor x = random_tensor(s, rng, -1, 1), w = random_tensor(s, rng, 0.5f, 1.5f);
        const float factor = 0.5f + rng.uniform();
        rec.check([&] { return probe(scale(x, factor), w); }, x, linear_options());
    });
    cases.emplace_back("scale_by", [](Rng& rng, Recorder& rec) {
        const Shape s{pick(rng, 1, 4), pick(rng, 1, 4)};
        Tensor x = random_tensor(s, rng, 0.2f, 1), w = random_tensor(s, rng, 0.5f, 1.5f);
        Tensor g = random_tensor(Shape{1}, rng, 0.5f, 2);
        rec.check([&] { return probe(scale_by(x, g), w); }, x, linear_options());
        rec.check([&] { return probe(scale_by(x, g), w); }, g, linear_options());
    });
    cases.emplace_back("sum", [](Rng& rng, Recorder& rec) {
        Tensor x = random_tensor(Shape{pick(rng, 1, 4), pick(rng, 1, 6)}, rng, -1, 1);
        rec.check([&] { return sum(x); }, x, linear_options());
    });
    cases.emplace_back("reshape", [](Rng& rng, Recorder& rec) {
        const std::size_t a = pick(rng, 1, 4), b = pick(rng, 1, 4);
        Tensor x = random_tensor(Shape{a, b}, rng, -1, 1), w = random_tensor(Shape{b * a}, rng, 0.5f, 1.5f);
        rec.check([&] { return probe(reshape(x, Shape{a * b}), w); }, x, linear_options());
    });
    cases.emplace_back("dense", [](Rng& rng, Recorder& rec) {
        const std::size_t n = pick(rng, 1, 3), din = pick(rng, 1, 5), dout = pick(rng, 1, 4);
        Tensor x = random_tensor(Shape{n, din}, rng, -1, 1), wt = random_tensor(Shape{din, dout}, rng, -1, 1);
        Tensor b = random_tensor(Shape{dout}, rng, -1, 1), w = random_tensor(Shape{n, dout}, rng, 0.5f, 1.5f);
        auto f = [&] { return probe(dense(x, wt, b), w); };
        rec.check(f, x, linear_options());
        rec.check(f, wt, linear_options());
        rec.check(f, b, linear_options());
    });
    cases.emplace_back("matmul_nt", [](Rng& rng, Recorder& rec) {
        const std::size_t n = pick(rng, 1, 3), d = pick(rng, 1, 5), c = pick(rng, 1, 4);
        Tensor a = random_tensor(Shape{n, d}, rng, -1, 1), b = random_tensor(Shape{c, d}, rng, -1, 1);
        Tensor w = random_tensor(Shape{n, c}, rng, 0.5f, 1.5f);
        auto f = [&] { return probe(matmul_nt(a, b), w); };
        rec.check(f, a, linear_options());
        rec.check(f, b, linear_options());
    });
    cases.emplace_back("conv2d", [](Rng& rng, Recorder& rec) {
        const std::size_t k = 1 + 2 * pick(rng, 0, 1), cin = pick(rng, 1, 3), cout = pick(rng, 1, 3);
        const int stride = static_cast<int>(pick(rng, 1, 2));
        const int padding = static_cast<int>(pick(rng, 0, k / 2));
        const Shape xs{pick(rng, 1, 2), pick(rng, k, 6), pick(rng, k, 6), cin};
        Tensor x = random_tensor(xs, rng, -1, 1), kernel = random_tensor(Shape{k, k, cin, cout}, rng, -1, 1);
        Tensor bias = random_tensor(Shape{cout}, rng, -1, 1);
        const Shape ys = conv2d(x, kernel, stride, padding).shape();
        Tensor w = random_tensor(ys, rng, 0.5f, 1.5f);
        auto f = [&] { return probe(conv2d(x, kernel, stride, padding, bias), w); };
        rec.check(f, x, linear_options());
        rec.check(f, kernel, linear_options());
        rec.check(f, bias, linear_options());
    });
    cases.emplace_back("pool2d_avg", [](Rng& rng, Recorder& rec) {
        const std::size_t th = pick(rng, 1, 2), tw = pick(rng, 1, 2);
        const Shape xs{pick(rng, 1, 2), th * pick(rng, 1, 3), tw * pick(rng, 1, 3), pick(rng, 1, 3)};
        Tensor x = random_tensor(xs, rng, -1, 1);
        Tensor w = random_tensor(Shape{xs[0], th, tw, xs[3]}, rng, 0.5f, 1.5f);
        rec.check([&] { return probe(pool2d(x, PoolMode::avg, th, tw), w); }, x, linear_options());
    });
    cases.emplace_back("pool2d_max", [](Rng& rng, Recorder& rec) {
        const std::size_t th = pick(rng, 1, 2), tw = pick(rng, 1, 2);
        const Shape xs{pick(rng, 1, 2), th * pick(rng, 1, 3), tw * pick(rng, 1, 3), pick(rng, 1, 3)};
        Tensor x = random_tensor(xs, rng, -1, 1);
        Tensor w = random_tensor(Shape{xs[0], th, tw, xs[3]}, rng, 0.5f, 1.5f);
        rec.check([&] { return probe(pool2d(x, PoolMode::max, th, tw), w); }, x, kinked_options());
    });
    cases.emplace_back("relu", [](Rng& rng, Recorder& rec) {
        const Shape s{pick(rng, 1, 3), pick(rng, 1, 6)};
        Tensor x = random_tensor(s, rng, -1, 1), w = random_tensor(s, rng, 0.5f, 1.5f);
        rec.check([&] { return probe(relu(x), w); }, x, kinked_options());
    });
    cases.emplace_back("l2_normalize", [](Rng& rng, Recorder& rec) {
        const Shape s{pick(rng, 1, 3), pick(rng, 2, 5)};
        Tensor x = random_tensor(s, rng, -1, 1), w = random_tensor(s, rng, -1.5f, 1.5f);
        rec.check([&] { return probe(l2_normalize(x), w); }, x, smooth_options());
    });
    cases.emplace_back("standardize", [](Rng& rng, Recorder& rec) {
        const Shape s{pick(rng, 1, 3), pick(rng, 2, 3), pick(rng, 1, 3), pick(rng, 2, 3)};
        Tensor x = random_tensor(s, rng, -1, 1), w = random_tensor(s, rng, -1.5f, 1.5f);
        rec.check([&] { return probe(standardize(x), w); }, x, smooth_options());
    });
    cases.emplace_back("softmax_cross_entropy", [](Rng& rng, Recorder& rec) {
        const std::size_t n = pick(rng, 1, 4), c = pick(rng, 2, 5);
        Tensor logits = random_tensor(Shape{n, c}, rng, -2, 2);
        std::vector<std::uint32_t> labels(n);
        for (auto& l : labels) {
            l = static_cast<std::uint32_t>(rng.below(c));
        }
        GradCheckOptions options = smooth_options();
        options.step = 0.1f; // mild curvature; a wider step keeps rounding down
        rec.check([&] { return softmax_cross_entropy(logits, labels); }, logits, options);
    });
    return cases;
}

} // namespace

std::vector<GradSuiteRow> op_gradient_suite(std::uint64_t seed, std::size_t instances)
{
    std::vector<GradSuiteRow> rows;
    const Rng root(seed);
    std::uint64_t case_id = 0;
    for (const auto& [name, run] : op_cases()) {
        Recorder rec;
        rec.row.name = name;
        for (std::size_t i = 0; i < instances; ++i) {
            Rng rng = root.child({case_id, i});
            run(rng, rec);
            ++rec.row.instances;
        }
        rows.push_back(rec.row);
        ++case_id;
    }
    return rows;
}

GradSuiteRow end_to_end_gradient_suite(std::uint64_t seed, std::size_t instances)
{
    Recorder rec;
    rec.row.name = "train_loss";
    const Rng root(seed);
    for (std::size_t i = 0; i < instances; ++i) {
        Rng rng = root.child(i);
        ModelSpec spec;
        spec.model.blocks = 3;
        spec.model.channels = {4, 6, 8};
        spec.model.stem_channels = 4;
        spec.model.convs_per_block = 1;
        spec.model.embed_dim = 6;
        spec.model.pool_mode = i % 2 == 0 ? PoolMode::max : PoolMode::avg;
        spec.model.aux = true;
        spec.model.standardize = i % 5 != 4;
        spec.noise.kind = i % 3 == 2 ? NoiseKind::dropout : NoiseKind::gaussian;
        spec.noise.spatial = i % 4 >= 2;
        spec.input_channels = 3;
        spec.num_classes = 3;
        const SdnnModel model = SdnnModel::create(spec, 4.0f, seed + i);

        const Tensor x = random_tensor(Shape{4, 16, 16, 3}, rng, -1, 1);
        const std::vector<std::uint32_t> labels = {0, 1, 2, static_cast<std::uint32_t>(rng.below(3))};
        const std::vector<double> weights(model.num_heads(), 1.0);
        const Rng noise_rng = rng.child(99);
        auto loss = [&] { return train_loss(forward_train(model, x, noise_rng), labels, weights); };

        // float32 loss: a smaller step is dominated by rounding.
        GradCheckOptions options = kinked_options();
        options.max_coordinates = 12;
        for (auto& [name, param] : model.named_parameters()) {
            rec.check(loss, param, options);
        }
        ++rec.row.instances;
    }
    return rec.row;
}

} // namespace sdnn
