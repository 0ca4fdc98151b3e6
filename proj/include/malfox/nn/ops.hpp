#ifndef MALFOX_NN_OPS_HPP
#define MALFOX_NN_OPS_HPP

// Forward kernels and their vector-Jacobian products. Image tensors are
// batch-first NHWC; a rank-3 HWC input is treated as a batch of one.

#include <malfox/error.hpp>
#include <malfox/nn/tensor.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace malfox::nn {

inline double sigmoid_scalar(double x)
{
    // Kept strictly inside (0, 1) even where exp() saturates.
    constexpr double lo = std::numeric_limits<double>::denorm_min();
    constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2;
    const double y = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    return std::clamp(y, lo, hi);
}

inline tensor sigmoid(const tensor& x)
{
    tensor y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i)
        y[i] = sigmoid_scalar(x[i]);
    return y;
}

inline tensor leaky_relu(const tensor& x, double slope)
{
    if (!(slope > 0))
        throw error(errc::config_invalid, "leaky_relu slope must be positive");
    tensor y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i)
        y[i] = x[i] > 0 ? x[i] : slope * x[i];
    return y;
}

/// Softmax over the last axis with max subtraction.
inline tensor softmax(const tensor& x)
{
    if (x.rank() == 0 || x.shape().back() == 0)
        throw error(errc::shape_mismatch, "softmax needs a non-empty last axis");
    const std::size_t width = x.shape().back();
    tensor y(x.shape());
    for (std::size_t row = 0; row < x.size() / width; ++row) {
        const double* in = x.data() + row * width;
        double* out = y.data() + row * width;
        const double peak = *std::max_element(in, in + width);
        double total = 0;
        for (std::size_t j = 0; j < width; ++j)
            total += out[j] = std::exp(in[j] - peak);
        for (std::size_t j = 0; j < width; ++j)
            out[j] /= total;
    }
    return y;
}

/// out = x W^T + B for x of shape (N, in), W of shape (out, in).
inline tensor dense(const tensor& x, const tensor& w, const tensor& b)
{
    if (x.rank() != 2 || w.rank() != 2 || b.rank() != 1 || x.dim(1) != w.dim(1) || b.dim(0) != w.dim(0))
        throw error(errc::shape_mismatch, "dense: x" + to_string(x.shape()) + " W" + to_string(w.shape()) + " B" +
                                              to_string(b.shape()));
    const std::size_t n = x.dim(0), in = w.dim(1), out = w.dim(0);
    tensor y({n, out});
    for (std::size_t s = 0; s < n; ++s) {
        const double* xs = x.data() + s * in;
        for (std::size_t o = 0; o < out; ++o) {
            const double* wo = w.data() + o * in;
            double acc = b[o];
            for (std::size_t i = 0; i < in; ++i)
                acc += wo[i] * xs[i];
            y[s * out + o] = acc;
        }
    }
    return y;
}

struct conv_geometry {
    std::size_t n, h, w, c, f, nf, oh, ow, pad_top, pad_left;

    static conv_geometry make(const shape_t& x, const shape_t& k, bool padded)
    {
        if (x.size() != 4 || k.size() != 4 || k[0] != k[1] || k[2] != x[3])
            throw error(errc::shape_mismatch, "conv2d: input " + to_string(x) + " kernel " + to_string(k));
        conv_geometry g{x[0], x[1], x[2], x[3], k[0], k[3], 0, 0, 0, 0};
        if (padded) {
            // Output keeps the input extent; odd padding goes to the bottom/right.
            g.oh = g.h;
            g.ow = g.w;
            g.pad_top = (g.f - 1) / 2;
            g.pad_left = (g.f - 1) / 2;
        } else {
            if (g.h < g.f || g.w < g.f)
                throw error(errc::shape_mismatch, "conv2d: window larger than input " + to_string(x));
            g.oh = g.h - g.f + 1;
            g.ow = g.w - g.f + 1;
        }
        return g;
    }
};

inline tensor as_batch4(const tensor& x)
{
    if (x.rank() == 3)
        return x.reshaped(with_batch(1, x.shape()));
    if (x.rank() != 4)
        throw error(errc::shape_mismatch, "expected rank 3 or 4 image tensor, got " + to_string(x.shape()));
    return x;
}

/// Stride-1 cross-correlation. Kernel shape (f, f, C, nf), bias (nf).
inline tensor conv2d(const tensor& input, const tensor& kernel, const tensor& bias, bool padded)
{
    const tensor x = as_batch4(input);
    const auto g = conv_geometry::make(x.shape(), kernel.shape(), padded);
    if (bias.size() != g.nf)
        throw error(errc::shape_mismatch, "conv2d: bias length != filter count");
    tensor y({g.n, g.oh, g.ow, g.nf});
    for (std::size_t s = 0; s < g.n; ++s)
        for (std::size_t i = 0; i < g.oh; ++i)
            for (std::size_t j = 0; j < g.ow; ++j) {
                double* out = y.data() + ((s * g.oh + i) * g.ow + j) * g.nf;
                for (std::size_t o = 0; o < g.nf; ++o)
                    out[o] = bias[o];
                for (std::size_t di = 0; di < g.f; ++di) {
                    const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(i + di) - static_cast<std::ptrdiff_t>(g.pad_top);
                    if (r < 0 || r >= static_cast<std::ptrdiff_t>(g.h))
                        continue;
                    for (std::size_t dj = 0; dj < g.f; ++dj) {
                        const std::ptrdiff_t c = static_cast<std::ptrdiff_t>(j + dj) - static_cast<std::ptrdiff_t>(g.pad_left);
                        if (c < 0 || c >= static_cast<std::ptrdiff_t>(g.w))
                            continue;
                        const double* in = x.data() + ((s * g.h + r) * g.w + c) * g.c;
                        const double* k = kernel.data() + (di * g.f + dj) * g.c * g.nf;
                        for (std::size_t ch = 0; ch < g.c; ++ch) {
                            const double v = in[ch];
                            const double* kc = k + ch * g.nf;
                            for (std::size_t o = 0; o < g.nf; ++o)
                                out[o] += v * kc[o];
                        }
                    }
                }
            }
    return input.rank() == 3 ? y.reshaped({g.oh, g.ow, g.nf}) : y;
}

/// Gradients of conv2d given dL/dy; returns dL/dx and accumulates into dk, db.
inline tensor conv2d_backward(const tensor& x, const tensor& kernel, const tensor& dy, bool padded, tensor& dk,
                              tensor& db)
{
    const auto g = conv_geometry::make(x.shape(), kernel.shape(), padded);
    tensor dx(x.shape());
    for (std::size_t s = 0; s < g.n; ++s)
        for (std::size_t i = 0; i < g.oh; ++i)
            for (std::size_t j = 0; j < g.ow; ++j) {
                const double* go = dy.data() + ((s * g.oh + i) * g.ow + j) * g.nf;
                for (std::size_t o = 0; o < g.nf; ++o)
                    db[o] += go[o];
                for (std::size_t di = 0; di < g.f; ++di) {
                    const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(i + di) - static_cast<std::ptrdiff_t>(g.pad_top);
                    if (r < 0 || r >= static_cast<std::ptrdiff_t>(g.h))
                        continue;
                    for (std::size_t dj = 0; dj < g.f; ++dj) {
                        const std::ptrdiff_t c = static_cast<std::ptrdiff_t>(j + dj) - static_cast<std::ptrdiff_t>(g.pad_left);
                        if (c < 0 || c >= static_cast<std::ptrdiff_t>(g.w))
                            continue;
                        const std::size_t in_off = ((s * g.h + r) * g.w + c) * g.c;
                        const std::size_t k_off = (di * g.f + dj) * g.c * g.nf;
                        for (std::size_t ch = 0; ch < g.c; ++ch) {
                            const double v = x[in_off + ch];
                            const double* kc = kernel.data() + k_off + ch * g.nf;
                            double* dkc = dk.data() + k_off + ch * g.nf;
                            double acc = 0;
                            for (std::size_t o = 0; o < g.nf; ++o) {
                                dkc[o] += v * go[o];
                                acc += kc[o] * go[o];
                            }
                            dx[in_off + ch] += acc;
                        }
                    }
                }
            }
    return dx;
}

/// Nearest-neighbour upsampling of the two spatial axes by `u`.
inline tensor upsample2d(const tensor& input, std::size_t u)
{
    if (u == 0)
        throw error(errc::config_invalid, "upsample factor must be positive");
    if (input.rank() == 2) {
        const tensor y = upsample2d(input.reshaped({1, input.dim(0), input.dim(1), 1}), u);
        return y.reshaped({input.dim(0) * u, input.dim(1) * u});
    }
    const tensor x = as_batch4(input);
    const std::size_t n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
    tensor y({n, h * u, w * u, c});
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t i = 0; i < h * u; ++i)
            for (std::size_t j = 0; j < w * u; ++j) {
                const double* in = x.data() + ((s * h + i / u) * w + j / u) * c;
                std::copy_n(in, c, y.data() + ((s * h * u + i) * w * u + j) * c);
            }
    return input.rank() == 3 ? y.reshaped({h * u, w * u, c}) : y;
}

struct pool_result {
    tensor output;
    std::vector<std::size_t> argmax; // flat input index per output element
};

inline pool_result maxpool2d_with_indices(const tensor& input, std::size_t pool, std::size_t stride)
{
    if (pool == 0 || stride == 0)
        throw error(errc::config_invalid, "pool size and stride must be positive");
    const tensor x = as_batch4(input);
    const std::size_t n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
    if (h < pool || w < pool)
        throw error(errc::shape_mismatch, "maxpool2d: spatial extent below pool size in " + to_string(x.shape()));
    const std::size_t oh = (h - pool) / stride + 1, ow = (w - pool) / stride + 1;
    pool_result r{tensor({n, oh, ow, c}), {}};
    r.argmax.resize(r.output.size());
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t i = 0; i < oh; ++i)
            for (std::size_t j = 0; j < ow; ++j)
                for (std::size_t ch = 0; ch < c; ++ch) {
                    std::size_t best = ((s * h + i * stride) * w + j * stride) * c + ch;
                    for (std::size_t di = 0; di < pool; ++di)
                        for (std::size_t dj = 0; dj < pool; ++dj) {
                            const std::size_t idx = ((s * h + i * stride + di) * w + j * stride + dj) * c + ch;
                            if (x[idx] > x[best])
                                best = idx;
                        }
                    const std::size_t o = ((s * oh + i) * ow + j) * c + ch;
                    r.output[o] = x[best];
                    r.argmax[o] = best;
                }
    if (input.rank() == 3)
        r.output = r.output.reshaped({oh, ow, c});
    return r;
}

inline tensor maxpool2d(const tensor& input, std::size_t pool, std::size_t stride)
{
    return maxpool2d_with_indices(input, pool, stride).output;
}

/// Strict threshold: 1 iff value > 0.5.
inline std::vector<std::uint8_t> binarize(std::span<const double> o)
{
    std::vector<std::uint8_t> bits(o.size());
    for (std::size_t i = 0; i < o.size(); ++i)
        bits[i] = o[i] > 0.5 ? 1 : 0;
    return bits;
}

} // namespace malfox::nn

#endif // MALFOX_NN_OPS_HPP
