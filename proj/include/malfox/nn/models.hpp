#ifndef MALFOX_NN_MODELS_HPP
#define MALFOX_NN_MODELS_HPP

#include <malfox/error.hpp>
#include <malfox/nn/layers.hpp>
#include <malfox/nn/net.hpp>

#include <cmath>
#include <cstdint>
#include <string>

namespace malfox::nn {

struct generator_config {
    std::size_t m = 64; // feature width
    std::size_t z = 3;  // noise width
    std::size_t ne1 = 16;
    double re = 0.01;
    double r = 0.5;
    std::size_t ne2 = 32;
    double alpha = 0.1;
    std::size_t conv1a = 2, conv1b = 4, conv1c = 4;
    std::size_t cf1 = 4, cf2 = 4, cf3 = 4;
    std::size_t conv1 = 1, conv2 = 2, conv3 = 2;
    std::size_t u = 2;
    std::size_t ne3 = 3;
    bool padded = false;

    static generator_config paper()
    {
        generator_config c;
        c.m = 16156;
        c.z = 3;
        c.ne1 = 82;
        c.re = 0.01;
        c.r = 0.5;
        c.ne2 = 1248;
        c.alpha = 0.1;
        c.conv1a = 8;
        c.conv1b = 13;
        c.conv1c = 12;
        c.cf1 = 32;
        c.cf2 = 64;
        c.cf3 = 256;
        c.conv1 = 5;
        c.conv2 = 2;
        c.conv3 = 2;
        c.u = 2;
        c.ne3 = 3;
        return c;
    }

    static generator_config desk(std::size_t m = 64)
    {
        generator_config c;
        c.m = m;
        return c;
    }

    std::size_t input_width() const { return m + z; }

    void validate() const
    {
        auto positive = [](std::size_t v, const char* name) {
            if (v == 0)
                throw error(errc::config_invalid, std::string("generator ") + name + " must be positive");
        };
        positive(m, "m");
        positive(z, "z");
        positive(ne1, "ne1");
        positive(ne2, "ne2");
        positive(ne3, "ne3");
        positive(cf1, "cf1");
        positive(cf2, "cf2");
        positive(cf3, "cf3");
        positive(conv1, "conv1");
        positive(conv2, "conv2");
        positive(conv3, "conv3");
        positive(u, "u");
        if (conv1a * conv1b * conv1c != ne2)
            throw error(errc::config_invalid, "generator reshape " + std::to_string(conv1a) + "x" +
                                                  std::to_string(conv1b) + "x" + std::to_string(conv1c) +
                                                  " does not hold ne2 = " + std::to_string(ne2));
        if (ne3 != z)
            throw error(errc::config_invalid, "generator ne3 = " + std::to_string(ne3) + " must equal z = " +
                                                  std::to_string(z));
        if (!(r >= 0 && r < 1))
            throw error(errc::config_invalid, "generator drop rate must be in [0, 1)");
        if (!(alpha > 0))
            throw error(errc::config_invalid, "generator slope must be positive");
        if (!(re >= 0))
            throw error(errc::config_invalid, "generator l2 coefficient must be non-negative");
    }
};

struct discriminator_config {
    std::size_t m = 61;
    std::size_t z = 3;
    std::size_t n = 32; // minibatch size
    std::size_t n_step = 8, n_input = 8;
    std::size_t cf1 = 8, cf2 = 8, cf3 = 4, cf4 = 4;
    std::size_t conv1 = 2;
    double sc = 0.1;
    std::size_t st = 1;
    std::size_t ps = 2;
    double r = 0.5;
    std::size_t fc1 = 16, fc2 = 2, fc3 = 2;
    double re = 0.01;

    static discriminator_config paper()
    {
        discriminator_config c;
        c.m = 16156;
        c.z = 3;
        c.n = 32;
        c.n_step = 143;
        c.n_input = 113;
        c.cf1 = 512;
        c.conv1 = 2;
        c.sc = 0.1;
        c.st = 1;
        c.ps = 2;
        c.cf2 = 256;
        c.r = 0.5;
        c.cf3 = 64;
        c.cf4 = 32;
        c.fc1 = 1024;
        c.re = 0.01;
        c.fc2 = 2;
        c.fc3 = 2;
        return c;
    }

    /// Desk-scale layers over the most nearly square factorization of m + z.
    /// A width-1 grid (prime m + z) drops the pool size to 1.
    static discriminator_config desk(std::size_t m, std::size_t z = 3)
    {
        discriminator_config c;
        c.m = m;
        c.z = z;
        const std::size_t total = m + z;
        std::size_t best = 1;
        for (std::size_t d = 1; d * d <= total; ++d)
            if (total % d == 0)
                best = d;
        c.r = 0.2;
        c.n_step = total / best;
        c.n_input = best;
        if (c.n_input < c.ps)
            c.ps = 1;
        return c;
    }

    std::size_t input_width() const { return m + z; }

    void validate() const
    {
        auto positive = [](std::size_t v, const char* name) {
            if (v == 0)
                throw error(errc::config_invalid, std::string("discriminator ") + name + " must be positive");
        };
        positive(m, "m");
        positive(n, "n");
        positive(n_step, "n_step");
        positive(n_input, "n_input");
        positive(cf1, "cf1");
        positive(cf2, "cf2");
        positive(cf3, "cf3");
        positive(cf4, "cf4");
        positive(conv1, "conv1");
        positive(st, "st");
        positive(ps, "ps");
        positive(fc1, "fc1");
        positive(fc2, "fc2");
        if (n_step * n_input != m + z)
            throw error(errc::config_invalid, "discriminator grid " + std::to_string(n_step) + "x" +
                                                  std::to_string(n_input) + " does not hold m + z = " +
                                                  std::to_string(m + z));
        if (fc3 != 2)
            throw error(errc::config_invalid, "discriminator fc3 must be 2, got " + std::to_string(fc3));
        if (!(r >= 0 && r < 1))
            throw error(errc::config_invalid, "discriminator drop rate must be in [0, 1)");
        if (!(sc > 0))
            throw error(errc::config_invalid, "discriminator slope must be positive");
        if (!(re >= 0))
            throw error(errc::config_invalid, "discriminator l2 coefficient must be non-negative");
    }
};

/// Generator stack with shapes checked but no parameters allocated.
inline net plan_generator(const generator_config& c)
{
    c.validate();
    net g({c.input_width()});
    g.emplace<batch_norm_layer>()
        .emplace<dense_layer>(c.ne1, c.re)
        .emplace<activation_layer>(activation_kind::sigmoid)
        .emplace<dropout_layer>(c.r)
        .emplace<dense_layer>(c.ne2)
        .emplace<activation_layer>(activation_kind::leaky_relu, c.alpha)
        .emplace<dropout_layer>(c.r)
        .emplace<reshape_layer>(shape_t{c.conv1a, c.conv1b, c.conv1c})
        .emplace<conv2d_layer>(c.cf1, c.conv1, c.padded)
        .emplace<upsample2d_layer>(c.u)
        .emplace<dropout_layer>(c.r)
        .emplace<activation_layer>(activation_kind::leaky_relu, c.alpha)
        .emplace<conv2d_layer>(c.cf2, c.conv2, c.padded)
        .emplace<dropout_layer>(c.r)
        .emplace<upsample2d_layer>(c.u)
        .emplace<conv2d_layer>(c.cf3, c.conv3, c.padded)
        .emplace<upsample2d_layer>(c.u)
        .emplace<activation_layer>(activation_kind::leaky_relu, c.alpha)
        .emplace<flatten_layer>()
        .emplace<dense_layer>(c.ne3)
        .emplace<activation_layer>(activation_kind::sigmoid);
    g.plan();
    return g;
}

inline net plan_discriminator(const discriminator_config& c)
{
    c.validate();
    net d({c.input_width()});
    d.emplace<batch_norm_layer>()
        .emplace<reshape_layer>(shape_t{c.n_step, c.n_input, 1})
        .emplace<conv2d_layer>(c.cf1, c.conv1, true)
        .emplace<activation_layer>(activation_kind::leaky_relu, c.sc)
        .emplace<maxpool2d_layer>(c.ps, c.st)
        .emplace<conv2d_layer>(c.cf2, c.conv1, true)
        .emplace<maxpool2d_layer>(c.ps, c.st)
        .emplace<dropout_layer>(c.r)
        .emplace<conv2d_layer>(c.cf3, c.conv1, true)
        .emplace<activation_layer>(activation_kind::leaky_relu, c.sc)
        .emplace<maxpool2d_layer>(c.ps, c.st)
        .emplace<dropout_layer>(c.r)
        .emplace<conv2d_layer>(c.cf4, c.conv1, true)
        .emplace<activation_layer>(activation_kind::leaky_relu, c.sc)
        .emplace<dropout_layer>(c.r)
        .emplace<flatten_layer>()
        .emplace<dense_layer>(c.fc1, c.re)
        .emplace<dropout_layer>(c.r)
        .emplace<dense_layer>(c.fc2, c.re)
        .emplace<activation_layer>(activation_kind::leaky_relu, c.sc)
        .emplace<dropout_layer>(c.r)
        .emplace<activation_layer>(activation_kind::sigmoid)
        .emplace<dense_layer>(c.fc3)
        .emplace<activation_layer>(activation_kind::softmax);
    d.plan();
    return d;
}

inline net build_generator(const generator_config& c, std::uint64_t seed)
{
    net g = plan_generator(c);
    g.initialize(seed);
    return g;
}

inline net build_discriminator(const discriminator_config& c, std::uint64_t seed)
{
    net d = plan_discriminator(c);
    d.initialize(seed);
    return d;
}

/// Malicious-class probability (softmax column 1) per sample.
inline std::vector<double> malicious_probability(const tensor& d_output)
{
    if (d_output.rank() != 2 || d_output.dim(1) != 2)
        throw error(errc::shape_mismatch, "discriminator output must be (N,2), got " + to_string(d_output.shape()));
    std::vector<double> p(d_output.dim(0));
    for (std::size_t i = 0; i < p.size(); ++i)
        p[i] = d_output[i * 2 + 1];
    return p;
}

/// Scatters dL/dp (p = column 1) back onto the (N,2) softmax output.
inline tensor malicious_probability_grad(std::span<const double> dp)
{
    tensor g({dp.size(), 2});
    for (std::size_t i = 0; i < dp.size(); ++i)
        g[i * 2 + 1] = dp[i];
    return g;
}

} // namespace malfox::nn

#endif // MALFOX_NN_MODELS_HPP
