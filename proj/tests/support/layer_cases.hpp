#ifndef MALFOX_TESTS_LAYER_CASES_HPP
#define MALFOX_TESTS_LAYER_CASES_HPP

// Random single-layer nets for gradient checking.

#include <malfox/nn/layers.hpp>
#include <malfox/nn/net.hpp>

#include <support/gradcheck.hpp>

#include <functional>
#include <random>
#include <string>
#include <vector>

namespace gradcheck {

struct layer_case {
    std::string name;
    malfox::nn::mode mode;
    std::uint64_t seed;
    std::function<malfox::nn::net(std::mt19937_64&, malfox::nn::shape_t&)> make;
};

inline std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi)
{
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline void randomize_parameters(malfox::nn::net& model, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto* p : model.parameters())
        for (auto& v : p->values())
            v = u(rng);
}

template <class Layer, class... Args>
malfox::nn::net single(const malfox::nn::shape_t& in, Args&&... args)
{
    malfox::nn::net model(in);
    model.emplace<Layer>(std::forward<Args>(args)...);
    model.plan();
    return model;
}

inline const std::vector<layer_case>& layer_cases()
{
    using namespace malfox::nn;
    using rng_t = std::mt19937_64;
    static const std::vector<layer_case> cases = {
        {"BatchNormTrain", mode::train, 1,
         [](rng_t& rng, shape_t& in) {
             in = {pick(rng, 1, 6)};
             return single<batch_norm_layer>(in);
         }},
        {"BatchNormInfer", mode::infer, 2,
         [](rng_t& rng, shape_t& in) {
             in = {pick(rng, 2, 3), pick(rng, 1, 3), 1};
             return single<batch_norm_layer>(in);
         }},
        {"Dense", mode::train, 3,
         [](rng_t& rng, shape_t& in) {
             in = {pick(rng, 1, 7)};
             return single<dense_layer>(in, pick(rng, 1, 5));
         }},
        {"DenseWithL2", mode::train, 4,
         [](rng_t& rng, shape_t& in) {
             in = {pick(rng, 1, 7)};
             return single<dense_layer>(in, pick(rng, 1, 5), 0.01);
         }},
        {"Dropout", mode::train, 5,
         [](rng_t& rng, shape_t& in) {
             in = {pick(rng, 3, 12)};
             return single<dropout_layer>(in, 0.5);
         }},
        {"Reshape", mode::train, 6,
         [](rng_t& rng, shape_t& in) {
             const auto a = pick(rng, 1, 4), b = pick(rng, 1, 4);
             in = {a * b};
             return single<reshape_layer>(in, shape_t{a, b, 1});
         }},
        {"Flatten", mode::train, 7,
         [](rng_t& rng, shape_t& in) {
             in = {pick(rng, 1, 3), pick(rng, 1, 3), pick(rng, 1, 3)};
             return single<flatten_layer>(in);
         }},
        {"Conv2dValid", mode::train, 8,
         [](rng_t& rng, shape_t& in) {
             const auto f = pick(rng, 1, 3);
             in = {f + pick(rng, 0, 2), f + pick(rng, 0, 2), pick(rng, 1, 3)};
             return single<conv2d_layer>(in, pick(rng, 1, 3), f, false);
         }},
        {"Conv2dPadded", mode::train, 9,
         [](rng_t& rng, shape_t& in) {
             in = {pick(rng, 1, 4), pick(rng, 1, 4), pick(rng, 1, 2)};
             return single<conv2d_layer>(in, pick(rng, 1, 3), pick(rng, 1, 3), true);
         }},
        {"Upsample", mode::train, 10,
         [](rng_t& rng, shape_t& in) {
             in = {pick(rng, 1, 3), pick(rng, 1, 3), pick(rng, 1, 2)};
             return single<upsample2d_layer>(in, pick(rng, 1, 3));
         }},
        {"MaxPool", mode::train, 11,
         [](rng_t& rng, shape_t& in) {
             const auto p = pick(rng, 1, 3);
             in = {p + pick(rng, 0, 3), p + pick(rng, 0, 3), pick(rng, 1, 2)};
             return single<maxpool2d_layer>(in, p, pick(rng, 1, 2));
         }},
        {"Sigmoid", mode::train, 12,
         [](rng_t& rng, shape_t& in) {
             in = {pick(rng, 1, 8)};
             return single<activation_layer>(in, activation_kind::sigmoid);
         }},
        {"LeakyRelu", mode::train, 13,
         [](rng_t& rng, shape_t& in) {
             in = {pick(rng, 1, 8)};
             const double slope = pick(rng, 0, 1) ? 0.1 : 0.01;
             return single<activation_layer>(in, activation_kind::leaky_relu, slope);
         }},
        {"Softmax", mode::train, 14,
         [](rng_t& rng, shape_t& in) {
             in = {pick(rng, 2, 6)};
             return single<activation_layer>(in, activation_kind::softmax);
         }},
    };
    return cases;
}

/// Worst relative error per instance: max of the input and parameter checks.
inline std::vector<double> run_case(const layer_case& c, int instances)
{
    std::mt19937_64 rng(c.seed);
    std::vector<double> errors;
    for (int i = 0; i < instances; ++i) {
        malfox::nn::shape_t in;
        auto model = c.make(rng, in);
        model.initialize(rng());
        randomize_parameters(model, rng);
        const std::size_t batch = pick(rng, 2, 3);
        const auto x = spread_tensor(malfox::nn::with_batch(batch, in), rng);
        const auto r = check_net(model, x, c.mode, rng);
        errors.push_back(std::max(r.input, r.params));
    }
    return errors;
}

inline const layer_case& find_case(const std::string& name)
{
    for (const auto& c : layer_cases())
        if (c.name == name)
            return c;
    throw std::out_of_range("no layer case " + name);
}

} // namespace gradcheck

#endif // MALFOX_TESTS_LAYER_CASES_HPP
