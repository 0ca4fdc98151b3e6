#ifndef MALFOX_NN_LAYERS_HPP
#define MALFOX_NN_LAYERS_HPP

#include <malfox/error.hpp>
#include <malfox/nn/ops.hpp>
#include <malfox/nn/tensor.hpp>

#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace malfox::nn {

enum class mode { train, infer };

/// Tags double as the checkpoint encoding; do not renumber.
enum class layer_kind : std::uint32_t {
    batch_norm = 1,
    dense = 2,
    dropout = 3,
    reshape = 4,
    conv2d = 5,
    upsample2d = 6,
    maxpool2d = 7,
    flatten = 8,
    activation = 9,
};

enum class activation_kind : std::uint32_t { sigmoid = 1, leaky_relu = 2, softmax = 3 };

struct forward_context {
    mode run_mode = mode::infer;
    std::mt19937_64* rng = nullptr; // dropout masks; required in train mode
};

/// One stage of a sequential net. Shapes exclude the batch axis.
/// forward() caches what backward() needs; backward() returns dL/dx and
/// accumulates parameter gradients.
class layer {
public:
    virtual ~layer() = default;

    virtual layer_kind kind() const = 0;
    virtual std::string describe() const = 0;
    virtual shape_t output_shape(const shape_t& in) const = 0;
    virtual tensor forward(const tensor& x, forward_context& ctx) = 0;
    virtual tensor backward(const tensor& grad) = 0;
    virtual std::unique_ptr<layer> clone() const = 0;

    /// Hyperparameters sufficient to rebuild the layer (checkpoint encoding).
    virtual std::vector<double> hyper() const { return {}; }

    /// Allocate and initialize parameters for a known input shape.
    virtual void initialize(const shape_t& /*in*/, std::mt19937_64& /*rng*/) {}

    virtual std::vector<tensor*> parameters() { return {}; }
    virtual std::vector<tensor*> gradients() { return {}; }
    /// Non-trainable state saved with the parameters.
    virtual std::vector<tensor*> buffers() { return {}; }

    /// Coefficient of the l2 penalty on this layer's weight matrix (0 = none).
    virtual double l2_coefficient() const { return 0.0; }
    virtual double l2_penalty() const { return 0.0; }
    virtual void add_l2_gradient() {}

    void zero_grad()
    {
        for (auto* g : gradients())
            g->fill(0.0);
    }
};

namespace detail {

inline double glorot_limit(std::size_t fan_in, std::size_t fan_out)
{
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

inline void glorot_fill(tensor& t, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng)
{
    const double limit = glorot_limit(fan_in, fan_out);
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (auto& v : t.values())
        v = dist(rng);
}

} // namespace detail

/// Per-feature normalization over the batch. Train mode uses batch statistics
/// and updates the running ones; infer mode uses the running statistics.
class batch_norm_layer final : public layer {
public:
    explicit batch_norm_layer(double momentum = 0.9, double epsilon = 1e-3) : momentum_(momentum), epsilon_(epsilon) {}

    layer_kind kind() const override { return layer_kind::batch_norm; }
    std::string describe() const override { return "BatchNorm"; }
    shape_t output_shape(const shape_t& in) const override { return in; }
    std::vector<double> hyper() const override { return {momentum_, epsilon_}; }
    std::unique_ptr<layer> clone() const override { return std::make_unique<batch_norm_layer>(*this); }

    void initialize(const shape_t& in, std::mt19937_64&) override
    {
        const std::size_t f = product(in);
        gamma_ = tensor({f}, 1.0);
        beta_ = tensor({f}, 0.0);
        running_mean_ = tensor({f}, 0.0);
        running_var_ = tensor({f}, 1.0);
        dgamma_ = tensor({f});
        dbeta_ = tensor({f});
    }

    std::vector<tensor*> parameters() override { return {&gamma_, &beta_}; }
    std::vector<tensor*> gradients() override { return {&dgamma_, &dbeta_}; }
    std::vector<tensor*> buffers() override { return {&running_mean_, &running_var_}; }

    tensor forward(const tensor& x, forward_context& ctx) override
    {
        const std::size_t n = x.dim(0), f = x.size() / n;
        if (f != gamma_.size())
            throw error(errc::shape_mismatch, "batch_norm: feature width " + std::to_string(f));
        shape_ = x.shape();
        train_ = ctx.run_mode == mode::train;
        xhat_ = tensor(x.shape());
        inv_std_ = tensor({f});
        tensor y(x.shape());
        for (std::size_t j = 0; j < f; ++j) {
            double mean = running_mean_[j], var = running_var_[j];
            if (train_) {
                mean = 0;
                for (std::size_t s = 0; s < n; ++s)
                    mean += x[s * f + j];
                mean /= static_cast<double>(n);
                var = 0;
                for (std::size_t s = 0; s < n; ++s)
                    var += (x[s * f + j] - mean) * (x[s * f + j] - mean);
                var /= static_cast<double>(n);
                running_mean_[j] = momentum_ * running_mean_[j] + (1 - momentum_) * mean;
                running_var_[j] = momentum_ * running_var_[j] + (1 - momentum_) * var;
            }
            inv_std_[j] = 1.0 / std::sqrt(var + epsilon_);
            for (std::size_t s = 0; s < n; ++s) {
                const double xh = (x[s * f + j] - mean) * inv_std_[j];
                xhat_[s * f + j] = xh;
                y[s * f + j] = gamma_[j] * xh + beta_[j];
            }
        }
        return y;
    }

    tensor backward(const tensor& dy) override
    {
        const std::size_t n = shape_[0], f = dy.size() / n;
        tensor dx(shape_);
        for (std::size_t j = 0; j < f; ++j) {
            double sum_dy = 0, sum_dy_xhat = 0;
            for (std::size_t s = 0; s < n; ++s) {
                sum_dy += dy[s * f + j];
                sum_dy_xhat += dy[s * f + j] * xhat_[s * f + j];
            }
            dgamma_[j] += sum_dy_xhat;
            dbeta_[j] += sum_dy;
            const double g = gamma_[j] * inv_std_[j];
            for (std::size_t s = 0; s < n; ++s) {
                if (train_) {
                    const double nn = static_cast<double>(n);
                    dx[s * f + j] = g / nn * (nn * dy[s * f + j] - sum_dy - xhat_[s * f + j] * sum_dy_xhat);
                } else {
                    dx[s * f + j] = g * dy[s * f + j];
                }
            }
        }
        return dx;
    }

private:
    double momentum_, epsilon_;
    tensor gamma_, beta_, running_mean_, running_var_, dgamma_, dbeta_;
    shape_t shape_;
    tensor xhat_, inv_std_;
    bool train_ = false;
};

/// Fully connected: y = W x + B over a flat per-sample input.
class dense_layer final : public layer {
public:
    explicit dense_layer(std::size_t units, double l2 = 0.0) : units_(units), l2_(l2)
    {
        if (units == 0)
            throw error(errc::config_invalid, "dense layer needs at least one unit");
    }

    layer_kind kind() const override { return layer_kind::dense; }
    std::string describe() const override
    {
        return "Dense(" + std::to_string(units_) + (l2_ > 0 ? ", l2=" + std::to_string(l2_) : "") + ")";
    }
    shape_t output_shape(const shape_t& in) const override
    {
        if (in.size() != 1)
            throw error(errc::config_invalid, "dense layer needs a flat input, got " + to_string(in));
        return {units_};
    }
    std::vector<double> hyper() const override { return {static_cast<double>(units_), l2_}; }
    std::unique_ptr<layer> clone() const override { return std::make_unique<dense_layer>(*this); }

    void initialize(const shape_t& in, std::mt19937_64& rng) override
    {
        weights_ = tensor({units_, in.at(0)});
        detail::glorot_fill(weights_, in.at(0), units_, rng);
        bias_ = tensor({units_});
        dweights_ = tensor(weights_.shape());
        dbias_ = tensor({units_});
    }

    std::vector<tensor*> parameters() override { return {&weights_, &bias_}; }
    std::vector<tensor*> gradients() override { return {&dweights_, &dbias_}; }

    double l2_coefficient() const override { return l2_; }
    double l2_penalty() const override
    {
        double s = 0;
        for (double w : weights_.values())
            s += w * w;
        return l2_ * s;
    }
    void add_l2_gradient() override
    {
        for (std::size_t i = 0; i < weights_.size(); ++i)
            dweights_[i] += 2.0 * l2_ * weights_[i];
    }

    tensor forward(const tensor& x, forward_context&) override
    {
        input_ = x;
        return dense(x, weights_, bias_);
    }

    tensor backward(const tensor& dy) override
    {
        const std::size_t n = input_.dim(0), in = weights_.dim(1), out = units_;
        tensor dx(input_.shape());
        for (std::size_t s = 0; s < n; ++s) {
            const double* xs = input_.data() + s * in;
            const double* gs = dy.data() + s * out;
            double* dxs = dx.data() + s * in;
            for (std::size_t o = 0; o < out; ++o) {
                const double g = gs[o];
                dbias_[o] += g;
                double* dwo = dweights_.data() + o * in;
                const double* wo = weights_.data() + o * in;
                for (std::size_t i = 0; i < in; ++i) {
                    dwo[i] += g * xs[i];
                    dxs[i] += g * wo[i];
                }
            }
        }
        return dx;
    }

    tensor& weights() { return weights_; }
    tensor& bias() { return bias_; }

private:
    std::size_t units_;
    double l2_;
    tensor weights_, bias_, dweights_, dbias_;
    tensor input_;
};

/// Inverted dropout: train mode zeroes each element with probability `rate`
/// and scales survivors by 1/(1-rate); infer mode is the identity.
class dropout_layer final : public layer {
public:
    explicit dropout_layer(double rate) : rate_(rate)
    {
        if (!(rate >= 0.0 && rate < 1.0))
            throw error(errc::config_invalid, "drop rate must be in [0, 1)");
    }

    layer_kind kind() const override { return layer_kind::dropout; }
    std::string describe() const override { return "Dropout(" + std::to_string(rate_) + ")"; }
    shape_t output_shape(const shape_t& in) const override { return in; }
    std::vector<double> hyper() const override { return {rate_}; }
    std::unique_ptr<layer> clone() const override { return std::make_unique<dropout_layer>(*this); }

    /// Reuse the previous mask on the next forward passes (finite-difference checks).
    void freeze_mask(bool frozen) { frozen_ = frozen; }

    tensor forward(const tensor& x, forward_context& ctx) override
    {
        if (ctx.run_mode == mode::infer || rate_ == 0.0) {
            mask_ = tensor(x.shape(), 1.0);
            return x;
        }
        if (!(frozen_ && mask_.shape() == x.shape())) {
            if (ctx.rng == nullptr)
                throw error(errc::invariant_violation, "dropout in train mode needs an rng");
            std::bernoulli_distribution keep(1.0 - rate_);
            mask_ = tensor(x.shape());
            const double scale = 1.0 / (1.0 - rate_);
            for (auto& m : mask_.values())
                m = keep(*ctx.rng) ? scale : 0.0;
        }
        tensor y(x.shape());
        for (std::size_t i = 0; i < x.size(); ++i)
            y[i] = x[i] * mask_[i];
        return y;
    }

    tensor backward(const tensor& dy) override
    {
        tensor dx(dy.shape());
        for (std::size_t i = 0; i < dy.size(); ++i)
            dx[i] = dy[i] * mask_[i];
        return dx;
    }

private:
    double rate_;
    bool frozen_ = false;
    tensor mask_;
};

class reshape_layer final : public layer {
public:
    explicit reshape_layer(shape_t target) : target_(std::move(target)) {}

    layer_kind kind() const override { return layer_kind::reshape; }
    std::string describe() const override { return "Reshape" + to_string(target_); }
    shape_t output_shape(const shape_t& in) const override
    {
        if (product(in) != product(target_))
            throw error(errc::config_invalid, "cannot reshape " + to_string(in) + " to " + to_string(target_));
        return target_;
    }
    std::vector<double> hyper() const override { return {target_.begin(), target_.end()}; }
    std::unique_ptr<layer> clone() const override { return std::make_unique<reshape_layer>(*this); }

    tensor forward(const tensor& x, forward_context&) override
    {
        in_shape_ = x.shape();
        return x.reshaped(with_batch(x.dim(0), target_));
    }
    tensor backward(const tensor& dy) override { return dy.reshaped(in_shape_); }

private:
    shape_t target_;
    shape_t in_shape_;
};

class flatten_layer final : public layer {
public:
    layer_kind kind() const override { return layer_kind::flatten; }
    std::string describe() const override { return "Flatten"; }
    shape_t output_shape(const shape_t& in) const override { return {product(in)}; }
    std::unique_ptr<layer> clone() const override { return std::make_unique<flatten_layer>(*this); }

    tensor forward(const tensor& x, forward_context&) override
    {
        in_shape_ = x.shape();
        return x.reshaped({x.dim(0), x.size() / x.dim(0)});
    }
    tensor backward(const tensor& dy) override { return dy.reshaped(in_shape_); }

private:
    shape_t in_shape_;
};

/// nf filters of size (f, f), stride 1; `padded` keeps the spatial extent.
class conv2d_layer final : public layer {
public:
    conv2d_layer(std::size_t filters, std::size_t window, bool padded)
        : filters_(filters), window_(window), padded_(padded)
    {
        if (filters == 0 || window == 0)
            throw error(errc::config_invalid, "conv2d needs positive filters and window");
    }

    layer_kind kind() const override { return layer_kind::conv2d; }
    std::string describe() const override
    {
        return "Conv2D(" + std::to_string(filters_) + ", (" + std::to_string(window_) + "," +
               std::to_string(window_) + ")" + (padded_ ? ", same" : ", valid") + ")";
    }
    shape_t output_shape(const shape_t& in) const override
    {
        if (in.size() != 3)
            throw error(errc::config_invalid, "conv2d needs an (H, W, C) input, got " + to_string(in));
        if (padded_)
            return {in[0], in[1], filters_};
        if (in[0] < window_ || in[1] < window_)
            throw error(errc::config_invalid, "conv2d window " + std::to_string(window_) + " exceeds input " + to_string(in));
        return {in[0] - window_ + 1, in[1] - window_ + 1, filters_};
    }
    std::vector<double> hyper() const override
    {
        return {static_cast<double>(filters_), static_cast<double>(window_), padded_ ? 1.0 : 0.0};
    }
    std::unique_ptr<layer> clone() const override { return std::make_unique<conv2d_layer>(*this); }

    void initialize(const shape_t& in, std::mt19937_64& rng) override
    {
        kernel_ = tensor({window_, window_, in.at(2), filters_});
        detail::glorot_fill(kernel_, window_ * window_ * in.at(2), window_ * window_ * filters_, rng);
        bias_ = tensor({filters_});
        dkernel_ = tensor(kernel_.shape());
        dbias_ = tensor({filters_});
    }

    std::vector<tensor*> parameters() override { return {&kernel_, &bias_}; }
    std::vector<tensor*> gradients() override { return {&dkernel_, &dbias_}; }

    tensor forward(const tensor& x, forward_context&) override
    {
        input_ = x;
        return conv2d(x, kernel_, bias_, padded_);
    }
    tensor backward(const tensor& dy) override { return conv2d_backward(input_, kernel_, dy, padded_, dkernel_, dbias_); }

    tensor& kernel() { return kernel_; }
    tensor& bias() { return bias_; }

private:
    std::size_t filters_, window_;
    bool padded_;
    tensor kernel_, bias_, dkernel_, dbias_;
    tensor input_;
};

class upsample2d_layer final : public layer {
public:
    explicit upsample2d_layer(std::size_t factor) : factor_(factor)
    {
        if (factor == 0)
            throw error(errc::config_invalid, "upsample factor must be positive");
    }

    layer_kind kind() const override { return layer_kind::upsample2d; }
    std::string describe() const override { return "UpSampling2D(" + std::to_string(factor_) + ")"; }
    shape_t output_shape(const shape_t& in) const override
    {
        if (in.size() != 3)
            throw error(errc::config_invalid, "upsample needs an (H, W, C) input");
        return {in[0] * factor_, in[1] * factor_, in[2]};
    }
    std::vector<double> hyper() const override { return {static_cast<double>(factor_)}; }
    std::unique_ptr<layer> clone() const override { return std::make_unique<upsample2d_layer>(*this); }

    tensor forward(const tensor& x, forward_context&) override
    {
        in_shape_ = x.shape();
        return upsample2d(x, factor_);
    }

    tensor backward(const tensor& dy) override
    {
        const std::size_t n = in_shape_[0], h = in_shape_[1], w = in_shape_[2], c = in_shape_[3], u = factor_;
        tensor dx(in_shape_);
        for (std::size_t s = 0; s < n; ++s)
            for (std::size_t i = 0; i < h * u; ++i)
                for (std::size_t j = 0; j < w * u; ++j) {
                    const double* g = dy.data() + ((s * h * u + i) * w * u + j) * c;
                    double* d = dx.data() + ((s * h + i / u) * w + j / u) * c;
                    for (std::size_t ch = 0; ch < c; ++ch)
                        d[ch] += g[ch];
                }
        return dx;
    }

private:
    std::size_t factor_;
    shape_t in_shape_;
};

class maxpool2d_layer final : public layer {
public:
    maxpool2d_layer(std::size_t pool, std::size_t stride) : pool_(pool), stride_(stride)
    {
        if (pool == 0 || stride == 0)
            throw error(errc::config_invalid, "pool size and stride must be positive");
    }

    layer_kind kind() const override { return layer_kind::maxpool2d; }
    std::string describe() const override
    {
        return "MaxPool2D(" + std::to_string(pool_) + ", stride " + std::to_string(stride_) + ")";
    }
    shape_t output_shape(const shape_t& in) const override
    {
        if (in.size() != 3)
            throw error(errc::config_invalid, "maxpool needs an (H, W, C) input");
        if (in[0] < pool_ || in[1] < pool_)
            throw error(errc::config_invalid, "pool size " + std::to_string(pool_) + " exceeds input " + to_string(in));
        return {(in[0] - pool_) / stride_ + 1, (in[1] - pool_) / stride_ + 1, in[2]};
    }
    std::vector<double> hyper() const override { return {static_cast<double>(pool_), static_cast<double>(stride_)}; }
    std::unique_ptr<layer> clone() const override { return std::make_unique<maxpool2d_layer>(*this); }

    tensor forward(const tensor& x, forward_context&) override
    {
        in_shape_ = x.shape();
        auto r = maxpool2d_with_indices(x, pool_, stride_);
        argmax_ = std::move(r.argmax);
        return std::move(r.output);
    }

    tensor backward(const tensor& dy) override
    {
        tensor dx(in_shape_);
        for (std::size_t o = 0; o < dy.size(); ++o)
            dx[argmax_[o]] += dy[o];
        return dx;
    }

private:
    std::size_t pool_, stride_;
    shape_t in_shape_;
    std::vector<std::size_t> argmax_;
};

class activation_layer final : public layer {
public:
    explicit activation_layer(activation_kind kind, double slope = 0.1) : act_(kind), slope_(slope)
    {
        if (kind == activation_kind::leaky_relu && !(slope > 0))
            throw error(errc::config_invalid, "leaky_relu slope must be positive");
    }

    layer_kind kind() const override { return layer_kind::activation; }
    std::string describe() const override
    {
        switch (act_) {
        case activation_kind::sigmoid: return "Sigmoid";
        case activation_kind::leaky_relu: return "LeakyReLU(" + std::to_string(slope_) + ")";
        case activation_kind::softmax: return "Softmax";
        }
        return "Activation";
    }
    shape_t output_shape(const shape_t& in) const override { return in; }
    std::vector<double> hyper() const override { return {static_cast<double>(act_), slope_}; }
    std::unique_ptr<layer> clone() const override { return std::make_unique<activation_layer>(*this); }

    activation_kind function() const noexcept { return act_; }

    tensor forward(const tensor& x, forward_context&) override
    {
        input_ = x;
        switch (act_) {
        case activation_kind::sigmoid: output_ = sigmoid(x); break;
        case activation_kind::leaky_relu: output_ = leaky_relu(x, slope_); break;
        case activation_kind::softmax: output_ = softmax(x); break;
        }
        return output_;
    }

    tensor backward(const tensor& dy) override
    {
        tensor dx(dy.shape());
        switch (act_) {
        case activation_kind::sigmoid:
            for (std::size_t i = 0; i < dy.size(); ++i)
                dx[i] = dy[i] * output_[i] * (1.0 - output_[i]);
            break;
        case activation_kind::leaky_relu:
            for (std::size_t i = 0; i < dy.size(); ++i)
                dx[i] = input_[i] > 0 ? dy[i] : slope_ * dy[i];
            break;
        case activation_kind::softmax: {
            const std::size_t width = dy.shape().back();
            for (std::size_t row = 0; row < dy.size() / width; ++row) {
                const std::size_t base = row * width;
                double dot = 0;
                for (std::size_t j = 0; j < width; ++j)
                    dot += dy[base + j] * output_[base + j];
                for (std::size_t j = 0; j < width; ++j)
                    dx[base + j] = output_[base + j] * (dy[base + j] - dot);
            }
            break;
        }
        }
        return dx;
    }

private:
    activation_kind act_;
    double slope_;
    tensor input_, output_;
};

/// Rebuild a layer from its checkpoint tag and hyperparameters.
inline std::unique_ptr<layer> make_layer(layer_kind kind, const std::vector<double>& h)
{
    auto need = [&](std::size_t n) {
        if (h.size() < n)
            throw error(errc::format_error, "layer record has too few hyperparameters");
    };
    auto count = [](double v) { return static_cast<std::size_t>(std::llround(v)); };
    switch (kind) {
    case layer_kind::batch_norm: need(2); return std::make_unique<batch_norm_layer>(h[0], h[1]);
    case layer_kind::dense: need(2); return std::make_unique<dense_layer>(count(h[0]), h[1]);
    case layer_kind::dropout: need(1); return std::make_unique<dropout_layer>(h[0]);
    case layer_kind::reshape: {
        shape_t target;
        for (double v : h)
            target.push_back(count(v));
        return std::make_unique<reshape_layer>(target);
    }
    case layer_kind::conv2d: need(3); return std::make_unique<conv2d_layer>(count(h[0]), count(h[1]), h[2] != 0.0);
    case layer_kind::upsample2d: need(1); return std::make_unique<upsample2d_layer>(count(h[0]));
    case layer_kind::maxpool2d: need(2); return std::make_unique<maxpool2d_layer>(count(h[0]), count(h[1]));
    case layer_kind::flatten: return std::make_unique<flatten_layer>();
    case layer_kind::activation:
        need(2);
        return std::make_unique<activation_layer>(static_cast<activation_kind>(count(h[0])), h[1]);
    }
    throw error(errc::format_error, "unknown layer kind tag " + std::to_string(static_cast<std::uint32_t>(kind)));
}

} // namespace malfox::nn

#endif // MALFOX_NN_LAYERS_HPP
