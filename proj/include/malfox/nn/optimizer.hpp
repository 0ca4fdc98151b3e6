#ifndef MALFOX_NN_OPTIMIZER_HPP
#define MALFOX_NN_OPTIMIZER_HPP

#include <malfox/error.hpp>
#include <malfox/nn/net.hpp>

#include <cmath>
#include <vector>

namespace malfox::nn {

struct adam_config {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adam with bias correction. State is bound to one net's parameter layout.
class adam {
public:
    explicit adam(adam_config cfg = {}) : cfg_(cfg) {}

    const adam_config& config() const noexcept { return cfg_; }
    std::size_t steps() const noexcept { return t_; }

    void step(net& model)
    {
        auto params = model.parameters();
        auto grads = model.gradients();
        if (m_.empty()) {
            for (auto* p : params) {
                m_.emplace_back(p->size(), 0.0);
                v_.emplace_back(p->size(), 0.0);
            }
        }
        if (m_.size() != params.size())
            throw error(errc::shape_mismatch, "optimizer state does not match the net");
        ++t_;
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t k = 0; k < params.size(); ++k) {
            auto& p = *params[k];
            const auto& g = *grads[k];
            for (std::size_t i = 0; i < p.size(); ++i) {
                m_[k][i] = cfg_.beta1 * m_[k][i] + (1 - cfg_.beta1) * g[i];
                v_[k][i] = cfg_.beta2 * v_[k][i] + (1 - cfg_.beta2) * g[i] * g[i];
                const double mh = m_[k][i] / c1, vh = v_[k][i] / c2;
                p[i] -= cfg_.learning_rate * mh / (std::sqrt(vh) + cfg_.epsilon);
            }
        }
    }

private:
    adam_config cfg_;
    std::size_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

} // namespace malfox::nn

#endif // MALFOX_NN_OPTIMIZER_HPP
