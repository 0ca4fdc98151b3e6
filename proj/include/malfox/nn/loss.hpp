#ifndef MALFOX_NN_LOSS_HPP
#define MALFOX_NN_LOSS_HPP

// Both losses clamp the argument of each logarithm at epsilon, so exact 0/1
// probabilities give finite values and perfect discrimination gives exactly 0.

#include <malfox/error.hpp>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace malfox::nn {

inline constexpr double loss_epsilon = 1e-7;

namespace detail {

inline void check_probabilities(std::span<const double> p, const char* what)
{
    for (std::size_t i = 0; i < p.size(); ++i)
        if (!(p[i] >= 0.0 && p[i] <= 1.0))
            throw error(errc::domain_error, std::string(what) + "[" + std::to_string(i) + "] = " +
                                                std::to_string(p[i]) + " is not a probability");
}

inline double safe_log(double v, double eps) { return std::log(std::max(v, eps)); }

/// d/dv log(max(v, eps)).
inline double safe_log_grad(double v, double eps) { return v > eps ? 1.0 / v : 0.0; }

} // namespace detail

/// L_G = mean log D(G(sm, z)); minimized by the generator.
inline double loss_generator(std::span<const double> d, double eps = loss_epsilon)
{
    if (d.empty())
        throw error(errc::domain_error, "loss_generator over an empty minibatch");
    detail::check_probabilities(d, "d_outputs");
    double s = 0;
    for (double v : d)
        s += detail::safe_log(v, eps);
    return s / static_cast<double>(d.size());
}

inline std::vector<double> loss_generator_grad(std::span<const double> d, double eps = loss_epsilon)
{
    detail::check_probabilities(d, "d_outputs");
    std::vector<double> g(d.size());
    for (std::size_t i = 0; i < d.size(); ++i)
        g[i] = detail::safe_log_grad(d[i], eps) / static_cast<double>(d.size());
    return g;
}

/// L_D = -mean log(1 - D(sb)) - mean log D(sm). Either set may be empty
/// (its term is then omitted) but not both.
inline double loss_discriminator(std::span<const double> d_benign, std::span<const double> d_malware,
                                 double eps = loss_epsilon)
{
    if (d_benign.empty() && d_malware.empty())
        throw error(errc::domain_error, "loss_discriminator over an empty minibatch");
    detail::check_probabilities(d_benign, "d_benign");
    detail::check_probabilities(d_malware, "d_malware");
    double loss = 0;
    if (!d_benign.empty()) {
        double s = 0;
        for (double v : d_benign)
            s += detail::safe_log(1.0 - v, eps);
        loss -= s / static_cast<double>(d_benign.size());
    }
    if (!d_malware.empty()) {
        double s = 0;
        for (double v : d_malware)
            s += detail::safe_log(v, eps);
        loss -= s / static_cast<double>(d_malware.size());
    }
    return loss;
}

struct discriminator_loss_grad {
    std::vector<double> benign;
    std::vector<double> malware;
};

inline discriminator_loss_grad loss_discriminator_grad(std::span<const double> d_benign,
                                                       std::span<const double> d_malware, double eps = loss_epsilon)
{
    detail::check_probabilities(d_benign, "d_benign");
    detail::check_probabilities(d_malware, "d_malware");
    discriminator_loss_grad g{std::vector<double>(d_benign.size()), std::vector<double>(d_malware.size())};
    for (std::size_t i = 0; i < d_benign.size(); ++i)
        g.benign[i] = detail::safe_log_grad(1.0 - d_benign[i], eps) / static_cast<double>(d_benign.size());
    for (std::size_t i = 0; i < d_malware.size(); ++i)
        g.malware[i] = -detail::safe_log_grad(d_malware[i], eps) / static_cast<double>(d_malware.size());
    return g;
}

} // namespace malfox::nn

#endif // MALFOX_NN_LOSS_HPP
