#ifndef MALFOX_NN_NET_HPP
#define MALFOX_NN_NET_HPP

#include <malfox/error.hpp>
#include <malfox/nn/layers.hpp>
#include <malfox/nn/tensor.hpp>

#include <memory>
#include <random>
#include <string>
#include <vector>

namespace malfox::nn {

/// A sequential stack of layers over a fixed per-sample input shape.
/// plan() checks shape composition without allocating parameters.
class net {
public:
    net() = default;
    explicit net(shape_t input_shape) : input_shape_(std::move(input_shape)) {}

    net(const net& o) : input_shape_(o.input_shape_), shapes_(o.shapes_), initialized_(o.initialized_)
    {
        layers_.reserve(o.layers_.size());
        for (const auto& l : o.layers_)
            layers_.push_back(l->clone());
    }
    net& operator=(const net& o)
    {
        if (this != &o) {
            net copy(o);
            *this = std::move(copy);
        }
        return *this;
    }
    net(net&&) noexcept = default;
    net& operator=(net&&) noexcept = default;

    net& add(std::unique_ptr<layer> l)
    {
        layers_.push_back(std::move(l));
        shapes_.clear();
        initialized_ = false;
        return *this;
    }

    template <class Layer, class... Args>
    net& emplace(Args&&... args)
    {
        return add(std::make_unique<Layer>(std::forward<Args>(args)...));
    }

    /// Per-layer output shapes; throws ConfigInvalid when a pair fails to compose.
    const std::vector<shape_t>& plan()
    {
        shapes_.clear();
        shape_t s = input_shape_;
        if (s.empty() || product(s) == 0)
            throw error(errc::config_invalid, "net input shape must be non-empty");
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            try {
                s = layers_[i]->output_shape(s);
            } catch (const error& e) {
                throw error(errc::config_invalid, "layer " + std::to_string(i) + " (" + layers_[i]->describe() +
                                                      "): " + e.what());
            }
            if (product(s) == 0)
                throw error(errc::config_invalid, "layer " + std::to_string(i) + " produces an empty tensor");
            shapes_.push_back(s);
        }
        return shapes_;
    }

    void initialize(std::uint64_t seed)
    {
        if (shapes_.size() != layers_.size())
            plan();
        std::mt19937_64 rng(seed);
        shape_t s = input_shape_;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            layers_[i]->initialize(s, rng);
            s = shapes_[i];
        }
        initialized_ = true;
    }

    bool initialized() const noexcept { return initialized_; }
    const shape_t& input_shape() const noexcept { return input_shape_; }
    shape_t output_shape() const
    {
        if (shapes_.size() != layers_.size())
            throw error(errc::invariant_violation, "net has not been planned");
        return shapes_.empty() ? input_shape_ : shapes_.back();
    }
    std::size_t layer_count() const noexcept { return layers_.size(); }
    layer& at(std::size_t i) { return *layers_.at(i); }
    const layer& at(std::size_t i) const { return *layers_.at(i); }

    /// Number of trainable values implied by the plan (no allocation needed).
    std::size_t planned_parameter_count() const
    {
        if (shapes_.size() != layers_.size())
            throw error(errc::invariant_violation, "net has not been planned");
        std::size_t total = 0;
        shape_t in = input_shape_;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            const auto& l = *layers_[i];
            const auto h = l.hyper();
            switch (l.kind()) {
            case layer_kind::batch_norm: total += 2 * product(in); break;
            case layer_kind::dense: total += (in.at(0) + 1) * shapes_[i].at(0); break;
            case layer_kind::conv2d: {
                const auto f = static_cast<std::size_t>(h.at(1));
                const auto nf = static_cast<std::size_t>(h.at(0));
                total += f * f * in.at(2) * nf + nf;
                break;
            }
            default: break;
            }
            in = shapes_[i];
        }
        return total;
    }

    tensor forward(const tensor& x, forward_context& ctx)
    {
        require_ready();
        auto [n, sample] = split_batch(x.shape());
        if (sample != input_shape_ || n == 0)
            throw error(errc::shape_mismatch, "net expects (N," + to_string(input_shape_).substr(1) + ", got " +
                                                  to_string(x.shape()));
        tensor out = x;
        for (auto& l : layers_)
            out = l->forward(out, ctx);
        return out;
    }

    tensor forward(const tensor& x, mode m, std::mt19937_64* rng = nullptr)
    {
        forward_context ctx{m, rng};
        return forward(x, ctx);
    }

    /// Back-propagates dL/d(output); returns dL/d(input).
    tensor backward(const tensor& grad)
    {
        tensor g = grad;
        for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
            g = (*it)->backward(g);
        return g;
    }

    void zero_grad()
    {
        for (auto& l : layers_)
            l->zero_grad();
    }

    double l2_penalty() const
    {
        double s = 0;
        for (const auto& l : layers_)
            s += l->l2_penalty();
        return s;
    }

    void add_l2_gradients()
    {
        for (auto& l : layers_)
            l->add_l2_gradient();
    }

    std::vector<tensor*> parameters()
    {
        std::vector<tensor*> out;
        for (auto& l : layers_)
            for (auto* p : l->parameters())
                out.push_back(p);
        return out;
    }

    std::vector<tensor*> gradients()
    {
        std::vector<tensor*> out;
        for (auto& l : layers_)
            for (auto* g : l->gradients())
                out.push_back(g);
        return out;
    }

    std::size_t parameter_count()
    {
        std::size_t n = 0;
        for (auto* p : parameters())
            n += p->size();
        return n;
    }

    std::vector<double> flat_parameters()
    {
        std::vector<double> out;
        for (auto* p : parameters())
            out.insert(out.end(), p->values().begin(), p->values().end());
        return out;
    }

    std::string summary() const
    {
        std::string s = "input " + to_string(input_shape_) + "\n";
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            s += layers_[i]->describe();
            if (i < shapes_.size())
                s += " -> " + to_string(shapes_[i]);
            s += '\n';
        }
        return s;
    }

private:
    void require_ready() const
    {
        if (!initialized_)
            throw error(errc::invariant_violation, "net parameters have not been initialized");
    }

    shape_t input_shape_;
    std::vector<std::unique_ptr<layer>> layers_;
    std::vector<shape_t> shapes_;
    bool initialized_ = false;
};

} // namespace malfox::nn

#endif // MALFOX_NN_NET_HPP
