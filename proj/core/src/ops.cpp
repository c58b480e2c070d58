#include "sdnn/ops.hpp"

#include "sdnn/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sdnn {

namespace {

using detail::make_result;
using detail::NodePtr;

[[noreturn]] void shape_mismatch(const char* op, const Shape& a, const Shape& b)
{
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " +
                     shape_string(b));
}

void require_rank(const char* op, const Tensor& t, std::size_t rank)
{
    if (t.rank() != rank) {
        throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         " tensor, got " + shape_string(t.shape()));
    }
}

} // namespace

Tensor ewise(EwiseOp op, const Tensor& a, const Tensor& b)
{
    const auto av = a.data();
    const auto bv = b.data();
    switch (op) {
    case EwiseOp::add: {
        if (a.shape() != b.shape()) {
            shape_mismatch("add", a.shape(), b.shape());
        }
        std::vector<float> out(av.size());
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] = av[i] + bv[i];
        }
        return make_result("add", a.shape(), std::move(out), {a, b},
                           [](std::span<const float> g, std::span<const NodePtr> in) {
                               const float f = detail::backward_fault_scale("add");
                               for (const auto& node : in) {
                                   if (!node->requires_grad) {
                                       continue;
                                   }
                                   auto dst = node->ensure_grad();
                                   for (std::size_t i = 0; i < g.size(); ++i) {
                                       dst[i] += f * g[i];
                                   }
                               }
                           });
    }
    case EwiseOp::mul: {
        if (a.shape() != b.shape()) {
            shape_mismatch("mul", a.shape(), b.shape());
        }
        std::vector<float> out(av.size());
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] = av[i] * bv[i];
        }
        return make_result("mul", a.shape(), std::move(out), {a, b},
                           [](std::span<const float> g, std::span<const NodePtr> in) {
                               const float f = detail::backward_fault_scale("mul");
                               for (std::size_t k = 0; k < 2; ++k) {
                                   if (!in[k]->requires_grad) {
                                       continue;
                                   }
                                   const auto& other = in[1 - k]->data;
                                   auto dst = in[k]->ensure_grad();
                                   for (std::size_t i = 0; i < g.size(); ++i) {
                                       dst[i] += f * g[i] * other[i];
                                   }
                               }
                           });
    }
    case EwiseOp::broadcast_add_channel: {
        const bool shared = a.rank() == 4 && b.numel() == a.shape()[3];
        const bool per_sample = a.rank() == 4 && b.rank() == 2 && b.shape()[0] == a.shape()[0] &&
                                b.shape()[1] == a.shape()[3];
        if (!shared && !per_sample) {
            shape_mismatch("broadcast_add_channel", a.shape(), b.shape());
        }
        const std::size_t channels = a.shape()[3];
        // Elements per sample; the per-sample vector row is i / sample_size.
        const std::size_t sample_size = per_sample ? a.numel() / a.shape()[0] : a.numel();
        auto b_index = [channels, sample_size](std::size_t i) {
            return (i / sample_size) * channels + i % channels;
        };
        std::vector<float> out(av.size());
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] = av[i] + bv[b_index(i)];
        }
        return make_result("broadcast_add_channel", a.shape(), std::move(out), {a, b},
                           [b_index](std::span<const float> g, std::span<const NodePtr> in) {
                               const float f = detail::backward_fault_scale("broadcast_add_channel");
                               if (in[0]->requires_grad) {
                                   auto dst = in[0]->ensure_grad();
                                   for (std::size_t i = 0; i < g.size(); ++i) {
                                       dst[i] += f * g[i];
                                   }
                               }
                               if (in[1]->requires_grad) {
                                   auto dst = in[1]->ensure_grad();
                                   for (std::size_t i = 0; i < g.size(); ++i) {
                                       dst[b_index(i)] += f * g[i];
                                   }
                               }
                           });
    }
    }
    throw ValueError("ewise: unknown op");
}

Tensor scale(const Tensor& x, float factor)
{
    const auto xv = x.data();
    std::vector<float> out(xv.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = xv[i] * factor;
    }
    return make_result("scale", x.shape(), std::move(out), {x},
                       [factor](std::span<const float> g, std::span<const NodePtr> in) {
                           const float f = detail::backward_fault_scale("scale");
                           auto dst = in[0]->ensure_grad();
                           for (std::size_t i = 0; i < g.size(); ++i) {
                               dst[i] += f * factor * g[i];
                           }
                       });
}

Tensor scale_by(const Tensor& x, const Tensor& s)
{
    if (s.numel() != 1) {
        shape_mismatch("scale_by", x.shape(), s.shape());
    }
    const float factor = s.item();
    const auto xv = x.data();
    std::vector<float> out(xv.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = xv[i] * factor;
    }
    return make_result("scale_by", x.shape(), std::move(out), {x, s},
                       [](std::span<const float> g, std::span<const NodePtr> in) {
                           const float f = detail::backward_fault_scale("scale_by");
                           const auto& xd = in[0]->data;
                           const float factor = in[1]->data[0];
                           if (in[0]->requires_grad) {
                               auto dst = in[0]->ensure_grad();
                               for (std::size_t i = 0; i < g.size(); ++i) {
                                   dst[i] += f * factor * g[i];
                               }
                           }
                           if (in[1]->requires_grad) {
                               float acc = 0.0f;
                               for (std::size_t i = 0; i < g.size(); ++i) {
                                   acc += g[i] * xd[i];
                               }
                               in[1]->ensure_grad()[0] += f * acc;
                           }
                       });
}

Tensor sum(const Tensor& x)
{
    double total = 0.0;
    for (float v : x.data()) {
        total += v;
    }
    return make_result("sum", Shape{1}, {static_cast<float>(total)}, {x},
                       [](std::span<const float> g, std::span<const NodePtr> in) {
                           const float f = detail::backward_fault_scale("sum");
                           for (float& d : in[0]->ensure_grad()) {
                               d += f * g[0];
                           }
                       });
}

Tensor reshape(const Tensor& x, Shape shape)
{
    if (shape_numel(shape) != x.numel()) {
        shape_mismatch("reshape", x.shape(), shape);
    }
    std::vector<float> out(x.data().begin(), x.data().end());
    return make_result("reshape", std::move(shape), std::move(out), {x},
                       [](std::span<const float> g, std::span<const NodePtr> in) {
                           auto dst = in[0]->ensure_grad();
                           for (std::size_t i = 0; i < g.size(); ++i) {
                               dst[i] += g[i];
                           }
                       });
}

Tensor dense(const Tensor& x, const Tensor& weight, const std::optional<Tensor>& bias)
{
    require_rank("dense", x, 2);
    require_rank("dense", weight, 2);
    if (x.shape()[1] != weight.shape()[0]) {
        shape_mismatch("dense", x.shape(), weight.shape());
    }
    const std::size_t n = x.shape()[0];
    const std::size_t d_in = weight.shape()[0];
    const std::size_t d_out = weight.shape()[1];
    if (bias && bias->numel() != d_out) {
        shape_mismatch("dense bias", weight.shape(), bias->shape());
    }
    const auto xv = x.data();
    const auto wv = weight.data();
    std::vector<float> out(n * d_out, 0.0f);
    for (std::size_t r = 0; r < n; ++r) {
        float* o = out.data() + r * d_out;
        if (bias) {
            std::copy(bias->data().begin(), bias->data().end(), o);
        }
        for (std::size_t i = 0; i < d_in; ++i) {
            const float xi = xv[r * d_in + i];
            const float* w = wv.data() + i * d_out;
            for (std::size_t j = 0; j < d_out; ++j) {
                o[j] += xi * w[j];
            }
        }
    }
    auto backward = [n, d_in, d_out](std::span<const float> g, std::span<const NodePtr> in) {
        const float f = detail::backward_fault_scale("dense");
        const auto& xd = in[0]->data;
        const auto& wd = in[1]->data;
        if (in[0]->requires_grad) {
            auto dx = in[0]->ensure_grad();
            for (std::size_t r = 0; r < n; ++r) {
                const float* gr = g.data() + r * d_out;
                for (std::size_t i = 0; i < d_in; ++i) {
                    const float* w = wd.data() + i * d_out;
                    float acc = 0.0f;
                    for (std::size_t j = 0; j < d_out; ++j) {
                        acc += gr[j] * w[j];
                    }
                    dx[r * d_in + i] += f * acc;
                }
            }
        }
        if (in[1]->requires_grad) {
            auto dw = in[1]->ensure_grad();
            for (std::size_t r = 0; r < n; ++r) {
                const float* gr = g.data() + r * d_out;
                for (std::size_t i = 0; i < d_in; ++i) {
                    const float xi = f * xd[r * d_in + i];
                    float* w = dw.data() + i * d_out;
                    for (std::size_t j = 0; j < d_out; ++j) {
                        w[j] += xi * gr[j];
                    }
                }
            }
        }
        if (in.size() > 2 && in[2]->requires_grad) {
            auto db = in[2]->ensure_grad();
            for (std::size_t r = 0; r < n; ++r) {
                for (std::size_t j = 0; j < d_out; ++j) {
                    db[j] += f * g[r * d_out + j];
                }
            }
        }
    };
    Shape shape{n, d_out};
    if (bias) {
        return make_result("dense", std::move(shape), std::move(out), {x, weight, *bias}, backward);
    }
    return make_result("dense", std::move(shape), std::move(out), {x, weight}, backward);
}

Tensor matmul_nt(const Tensor& a, const Tensor& b)
{
    require_rank("matmul_nt", a, 2);
    require_rank("matmul_nt", b, 2);
    if (a.shape()[1] != b.shape()[1]) {
        shape_mismatch("matmul_nt", a.shape(), b.shape());
    }
    const std::size_t n = a.shape()[0];
    const std::size_t c = b.shape()[0];
    const std::size_t d = a.shape()[1];
    const auto av = a.data();
    const auto bv = b.data();
    std::vector<float> out(n * c);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t k = 0; k < c; ++k) {
            float acc = 0.0f;
            for (std::size_t j = 0; j < d; ++j) {
                acc += av[r * d + j] * bv[k * d + j];
            }
            out[r * c + k] = acc;
        }
    }
    return make_result("matmul_nt", Shape{n, c}, std::move(out), {a, b},
                       [n, c, d](std::span<const float> g, std::span<const NodePtr> in) {
                           const float f = detail::backward_fault_scale("matmul_nt");
                           const auto& ad = in[0]->data;
                           const auto& bd = in[1]->data;
                           if (in[0]->requires_grad) {
                               auto da = in[0]->ensure_grad();
                               for (std::size_t r = 0; r < n; ++r) {
                                   for (std::size_t k = 0; k < c; ++k) {
                                       const float gk = f * g[r * c + k];
                                       for (std::size_t j = 0; j < d; ++j) {
                                           da[r * d + j] += gk * bd[k * d + j];
                                       }
                                   }
                               }
                           }
                           if (in[1]->requires_grad) {
                               auto db = in[1]->ensure_grad();
                               for (std::size_t r = 0; r < n; ++r) {
                                   for (std::size_t k = 0; k < c; ++k) {
                                       const float gk = f * g[r * c + k];
                                       for (std::size_t j = 0; j < d; ++j) {
                                           db[k * d + j] += gk * ad[r * d + j];
                                       }
                                   }
                               }
                           }
                       });
}

Tensor conv2d(const Tensor& x, const Tensor& kernel, int stride, int padding,
              const std::optional<Tensor>& bias)
{
    require_rank("conv2d", x, 4);
    require_rank("conv2d", kernel, 4);
    const auto& xs = x.shape();
    const auto& ks = kernel.shape();
    if (ks[0] != ks[1] || ks[0] % 2 == 0 || ks[2] != xs[3]) {
        shape_mismatch("conv2d", xs, ks);
    }
    if (stride < 1 || padding < 0) {
        throw ValueError("conv2d: stride must be >= 1 and padding >= 0");
    }
    const long n = static_cast<long>(xs[0]);
    const long h = static_cast<long>(xs[1]);
    const long w = static_cast<long>(xs[2]);
    const long ci = static_cast<long>(xs[3]);
    const long k = static_cast<long>(ks[0]);
    const long co = static_cast<long>(ks[3]);
    const long oh_num = h + 2 * padding - k;
    const long ow_num = w + 2 * padding - k;
    if (oh_num < 0 || ow_num < 0) {
        throw ShapeError("conv2d: non-positive output extent for input " + shape_string(xs) +
                         " and kernel " + shape_string(ks));
    }
    const long oh = oh_num / stride + 1;
    const long ow = ow_num / stride + 1;
    if (bias && bias->numel() != static_cast<std::size_t>(co)) {
        shape_mismatch("conv2d bias", ks, bias->shape());
    }

    const float* xd = x.data().data();
    const float* kd = kernel.data().data();
    std::vector<float> out(static_cast<std::size_t>(n * oh * ow * co), 0.0f);
    for (long b = 0; b < n; ++b) {
        for (long oy = 0; oy < oh; ++oy) {
            for (long ox = 0; ox < ow; ++ox) {
                float* o = out.data() + ((b * oh + oy) * ow + ox) * co;
                if (bias) {
                    std::copy(bias->data().begin(), bias->data().end(), o);
                }
                for (long ky = 0; ky < k; ++ky) {
                    const long iy = oy * stride - padding + ky;
                    if (iy < 0 || iy >= h) {
                        continue;
                    }
                    for (long kx = 0; kx < k; ++kx) {
                        const long ix = ox * stride - padding + kx;
                        if (ix < 0 || ix >= w) {
                            continue;
                        }
                        const float* xin = xd + ((b * h + iy) * w + ix) * ci;
                        const float* wk = kd + (ky * k + kx) * ci * co;
                        for (long c = 0; c < ci; ++c) {
                            const float xv = xin[c];
                            const float* wrow = wk + c * co;
                            for (long j = 0; j < co; ++j) {
                                o[j] += xv * wrow[j];
                            }
                        }
                    }
                }
            }
        }
    }

    auto backward = [=](std::span<const float> g, std::span<const NodePtr> in) {
        const float f = detail::backward_fault_scale("conv2d");
        const float* xdat = in[0]->data.data();
        const float* kdat = in[1]->data.data();
        const bool want_x = in[0]->requires_grad;
        const bool want_k = in[1]->requires_grad;
        float* dx = want_x ? in[0]->ensure_grad().data() : nullptr;
        float* dk = want_k ? in[1]->ensure_grad().data() : nullptr;
        for (long b = 0; b < n; ++b) {
            for (long oy = 0; oy < oh; ++oy) {
                for (long ox = 0; ox < ow; ++ox) {
                    const float* go = g.data() + ((b * oh + oy) * ow + ox) * co;
                    for (long ky = 0; ky < k; ++ky) {
                        const long iy = oy * stride - padding + ky;
                        if (iy < 0 || iy >= h) {
                            continue;
                        }
                        for (long kx = 0; kx < k; ++kx) {
                            const long ix = ox * stride - padding + kx;
                            if (ix < 0 || ix >= w) {
                                continue;
                            }
                            const long xoff = ((b * h + iy) * w + ix) * ci;
                            const long koff = (ky * k + kx) * ci * co;
                            for (long c = 0; c < ci; ++c) {
                                const float* wrow = kdat + koff + c * co;
                                if (want_x) {
                                    float acc = 0.0f;
                                    for (long j = 0; j < co; ++j) {
                                        acc += go[j] * wrow[j];
                                    }
                                    dx[xoff + c] += f * acc;
                                }
                                if (want_k) {
                                    const float xv = f * xdat[xoff + c];
                                    float* drow = dk + koff + c * co;
                                    for (long j = 0; j < co; ++j) {
                                        drow[j] += xv * go[j];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        if (in.size() > 2 && in[2]->requires_grad) {
            auto db = in[2]->ensure_grad();
            const std::size_t sites = static_cast<std::size_t>(n * oh * ow);
            for (std::size_t s = 0; s < sites; ++s) {
                for (long j = 0; j < co; ++j) {
                    db[static_cast<std::size_t>(j)] += f * g[s * static_cast<std::size_t>(co) + static_cast<std::size_t>(j)];
                }
            }
        }
    };
    Shape shape{static_cast<std::size_t>(n), static_cast<std::size_t>(oh),
                static_cast<std::size_t>(ow), static_cast<std::size_t>(co)};
    if (bias) {
        return make_result("conv2d", std::move(shape), std::move(out), {x, kernel, *bias}, backward);
    }
    return make_result("conv2d", std::move(shape), std::move(out), {x, kernel}, backward);
}

Tensor pool2d(const Tensor& x, PoolMode mode, std::size_t target_h, std::size_t target_w)
{
    require_rank("pool2d", x, 4);
    const auto& xs = x.shape();
    const std::size_t n = xs[0], h = xs[1], w = xs[2], c = xs[3];
    if (target_h == 0 || target_w == 0 || h % target_h != 0 || w % target_w != 0) {
        throw ShapeError("pool2d: spatial extent " + std::to_string(h) + "x" + std::to_string(w) +
                         " is not divisible by target " + std::to_string(target_h) + "x" +
                         std::to_string(target_w));
    }
    const std::size_t wh = h / target_h;
    const std::size_t ww = w / target_w;
    const auto xv = x.data();
    const std::size_t out_size = n * target_h * target_w * c;
    std::vector<float> out(out_size);

    if (mode == PoolMode::avg) {
        const float inv = 1.0f / static_cast<float>(wh * ww);
        for (std::size_t b = 0; b < n; ++b) {
            for (std::size_t ty = 0; ty < target_h; ++ty) {
                for (std::size_t tx = 0; tx < target_w; ++tx) {
                    float* o = out.data() + ((b * target_h + ty) * target_w + tx) * c;
                    for (std::size_t ch = 0; ch < c; ++ch) {
                        float acc = 0.0f;
                        for (std::size_t y = ty * wh; y < (ty + 1) * wh; ++y) {
                            for (std::size_t xx = tx * ww; xx < (tx + 1) * ww; ++xx) {
                                acc += xv[((b * h + y) * w + xx) * c + ch];
                            }
                        }
                        o[ch] = acc * inv;
                    }
                }
            }
        }
        return make_result(
            "pool2d_avg", Shape{n, target_h, target_w, c}, std::move(out), {x},
            [=](std::span<const float> g, std::span<const NodePtr> in) {
                const float f = detail::backward_fault_scale("pool2d_avg");
                auto dx = in[0]->ensure_grad();
                for (std::size_t b = 0; b < n; ++b) {
                    for (std::size_t y = 0; y < h; ++y) {
                        for (std::size_t xx = 0; xx < w; ++xx) {
                            const float* go =
                                g.data() + ((b * target_h + y / wh) * target_w + xx / ww) * c;
                            float* d = dx.data() + ((b * h + y) * w + xx) * c;
                            for (std::size_t ch = 0; ch < c; ++ch) {
                                d[ch] += f * go[ch] * inv;
                            }
                        }
                    }
                }
            });
    }

    std::vector<std::size_t> argmax(out_size);
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t ty = 0; ty < target_h; ++ty) {
            for (std::size_t tx = 0; tx < target_w; ++tx) {
                const std::size_t obase = ((b * target_h + ty) * target_w + tx) * c;
                for (std::size_t ch = 0; ch < c; ++ch) {
                    float best = -std::numeric_limits<float>::infinity();
                    std::size_t best_idx = ((b * h + ty * wh) * w + tx * ww) * c + ch;
                    for (std::size_t y = ty * wh; y < (ty + 1) * wh; ++y) {
                        for (std::size_t xx = tx * ww; xx < (tx + 1) * ww; ++xx) {
                            const std::size_t idx = ((b * h + y) * w + xx) * c + ch;
                            if (xv[idx] > best) {
                                best = xv[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    out[obase + ch] = best;
                    argmax[obase + ch] = best_idx;
                }
            }
        }
    }
    if (detail::kink_trace_active()) {
        for (std::size_t i = 0; i < argmax.size(); ++i) {
            detail::kink_trace_mix(argmax[i]);
        }
    }
    return make_result("pool2d_max", Shape{n, target_h, target_w, c}, std::move(out), {x},
                       [argmax = std::move(argmax)](std::span<const float> g,
                                                    std::span<const NodePtr> in) {
                           const float f = detail::backward_fault_scale("pool2d_max");
                           auto dx = in[0]->ensure_grad();
                           for (std::size_t i = 0; i < g.size(); ++i) {
                               dx[argmax[i]] += f * g[i];
                           }
                       });
}

Tensor relu(const Tensor& x)
{
    const auto xv = x.data();
    std::vector<float> out(xv.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = xv[i] > 0.0f ? xv[i] : 0.0f;
    }
    if (detail::kink_trace_active()) {
        for (std::size_t i = 0; i < out.size(); ++i) {
            detail::kink_trace_mix(i * 2 + (xv[i] > 0.0f ? 1 : 0));
        }
    }
    return make_result("relu", x.shape(), std::move(out), {x},
                       [](std::span<const float> g, std::span<const NodePtr> in) {
                           const float f = detail::backward_fault_scale("relu");
                           const auto& xd = in[0]->data;
                           auto dx = in[0]->ensure_grad();
                           for (std::size_t i = 0; i < g.size(); ++i) {
                               if (xd[i] > 0.0f) {
                                   dx[i] += f * g[i];
                               }
                           }
                       });
}

Tensor l2_normalize(const Tensor& x, float epsilon)
{
    require_rank("l2_normalize", x, 2);
    const std::size_t n = x.shape()[0];
    const std::size_t d = x.shape()[1];
    const auto xv = x.data();
    std::vector<float> out(xv.size());
    std::vector<float> inv_norm(n);
    std::vector<char> clamped(n, 0);
    for (std::size_t r = 0; r < n; ++r) {
        double ss = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            ss += double(xv[r * d + j]) * xv[r * d + j];
        }
        const double norm = std::sqrt(ss);
        clamped[r] = norm <= epsilon;
        inv_norm[r] = static_cast<float>(1.0 / std::max(norm, double(epsilon)));
        for (std::size_t j = 0; j < d; ++j) {
            out[r * d + j] = xv[r * d + j] * inv_norm[r];
        }
    }
    return make_result("l2_normalize", x.shape(), std::move(out), {x},
                       [n, d, inv_norm = std::move(inv_norm), clamped = std::move(clamped)](
                           std::span<const float> g, std::span<const NodePtr> in) {
                           const float f = detail::backward_fault_scale("l2_normalize");
                           const auto& xd = in[0]->data;
                           auto dx = in[0]->ensure_grad();
                           for (std::size_t r = 0; r < n; ++r) {
                               const float inv = inv_norm[r];
                               if (clamped[r]) {
                                   for (std::size_t j = 0; j < d; ++j) {
                                       dx[r * d + j] += f * g[r * d + j] * inv;
                                   }
                                   continue;
                               }
                               float gx = 0.0f;
                               for (std::size_t j = 0; j < d; ++j) {
                                   gx += g[r * d + j] * xd[r * d + j];
                               }
                               const float inv3 = inv * inv * inv;
                               for (std::size_t j = 0; j < d; ++j) {
                                   dx[r * d + j] +=
                                       f * (g[r * d + j] * inv - xd[r * d + j] * gx * inv3);
                               }
                           }
                       });
}

Tensor standardize(const Tensor& x, float epsilon)
{
    if (x.rank() < 2) {
        throw ShapeError("standardize: expected a batch axis, got " + shape_string(x.shape()));
    }
    const std::size_t n = x.shape()[0];
    const std::size_t d = x.numel() / n;
    const auto xv = x.data();
    std::vector<float> out(xv.size());
    std::vector<float> inv_std(n);
    for (std::size_t r = 0; r < n; ++r) {
        const float* row = xv.data() + r * d;
        double mean = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            mean += row[j];
        }
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double c = row[j] - mean;
            var += c * c;
        }
        var /= static_cast<double>(d);
        inv_std[r] = static_cast<float>(1.0 / std::sqrt(var + epsilon));
        for (std::size_t j = 0; j < d; ++j) {
            out[r * d + j] = static_cast<float>((row[j] - mean) * inv_std[r]);
        }
    }
    std::vector<float> y = out;
    return make_result("standardize", x.shape(), std::move(out), {x},
                       [n, d, inv_std = std::move(inv_std), y = std::move(y)](std::span<const float> g,
                                                                              std::span<const NodePtr> in) {
                           // dx = (g − mean(g) − y·mean(g·y)) / σ
                           const float f = detail::backward_fault_scale("standardize");
                           auto dx = in[0]->ensure_grad();
                           for (std::size_t r = 0; r < n; ++r) {
                               double g_mean = 0.0, gy_mean = 0.0;
                               for (std::size_t j = 0; j < d; ++j) {
                                   g_mean += g[r * d + j];
                                   gy_mean += double(g[r * d + j]) * y[r * d + j];
                               }
                               g_mean /= static_cast<double>(d);
                               gy_mean /= static_cast<double>(d);
                               for (std::size_t j = 0; j < d; ++j) {
                                   const double v = (g[r * d + j] - g_mean - y[r * d + j] * gy_mean) * inv_std[r];
                                   dx[r * d + j] += f * static_cast<float>(v);
                               }
                           }
                       });
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const std::uint32_t> labels)
{
    require_rank("softmax_cross_entropy", logits, 2);
    const std::size_t n = logits.shape()[0];
    const std::size_t c = logits.shape()[1];
    if (labels.size() != n) {
        throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for logits " + shape_string(logits.shape()));
    }
    for (std::uint32_t label : labels) {
        if (label >= c) {
            throw ValueError("softmax_cross_entropy: label " + std::to_string(label) +
                             " out of range for " + std::to_string(c) + " classes");
        }
    }
    const auto lv = logits.data();
    std::vector<float> probs(n * c);
    float loss = 0.0f;
    for (std::size_t r = 0; r < n; ++r) {
        const float* row = lv.data() + r * c;
        const float mx = *std::max_element(row, row + c);
        float z = 0.0f;
        for (std::size_t j = 0; j < c; ++j) {
            probs[r * c + j] = std::exp(row[j] - mx);
            z += probs[r * c + j];
        }
        for (std::size_t j = 0; j < c; ++j) {
            probs[r * c + j] /= z;
        }
        loss += -(row[labels[r]] - mx - std::log(z));
    }
    loss /= static_cast<float>(n);
    std::vector<std::uint32_t> saved_labels(labels.begin(), labels.end());
    return make_result("softmax_cross_entropy", Shape{1}, {loss}, {logits},
                       [n, c, probs = std::move(probs), saved_labels = std::move(saved_labels)](
                           std::span<const float> g, std::span<const NodePtr> in) {
                           const float f = detail::backward_fault_scale("softmax_cross_entropy");
                           auto dx = in[0]->ensure_grad();
                           const float scale = f * g[0] / static_cast<float>(n);
                           for (std::size_t r = 0; r < n; ++r) {
                               for (std::size_t j = 0; j < c; ++j) {
                                   const float onehot = (j == saved_labels[r]) ? 1.0f : 0.0f;
                                   dx[r * c + j] += scale * (probs[r * c + j] - onehot);
                               }
                           }
                       });
}

Tensor softmax(const Tensor& logits)
{
    require_rank("softmax", logits, 2);
    const std::size_t n = logits.shape()[0];
    const std::size_t c = logits.shape()[1];
    const auto lv = logits.data();
    std::vector<float> out(n * c);
    for (std::size_t r = 0; r < n; ++r) {
        const float* row = lv.data() + r * c;
        const float mx = *std::max_element(row, row + c);
        float z = 0.0f;
        for (std::size_t j = 0; j < c; ++j) {
            out[r * c + j] = std::exp(row[j] - mx);
            z += out[r * c + j];
        }
        for (std::size_t j = 0; j < c; ++j) {
            out[r * c + j] /= z;
        }
    }
    return Tensor(Shape{n, c}, std::move(out));
}

std::vector<std::uint32_t> argmax_rows(const Tensor& x)
{
    require_rank("argmax_rows", x, 2);
    const std::size_t n = x.shape()[0];
    const std::size_t c = x.shape()[1];
    const auto xv = x.data();
    std::vector<std::uint32_t> result(n);
    for (std::size_t r = 0; r < n; ++r) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < c; ++j) {
            if (xv[r * c + j] > xv[r * c + best]) {
                best = j;
            }
        }
        result[r] = static_cast<std::uint32_t>(best);
    }
    return result;
}

} // namespace sdnn
