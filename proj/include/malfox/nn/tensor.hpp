#ifndef MALFOX_NN_TENSOR_HPP
#define MALFOX_NN_TENSOR_HPP

#include <malfox/error.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace malfox::nn {

using shape_t = std::vector<std::size_t>;

inline std::size_t product(const shape_t& shape)
{
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string to_string(const shape_t& shape)
{
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i)
        s += (i ? "," : "") + std::to_string(shape[i]);
    return s + ")";
}

/// Dense row-major array of doubles.
class tensor {
public:
    tensor() = default;

    explicit tensor(shape_t shape, double fill = 0.0) : shape_(std::move(shape)), data_(product(shape_), fill) {}

    tensor(shape_t shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data))
    {
        if (product(shape_) != data_.size())
            throw error(errc::shape_mismatch, "shape " + nn::to_string(shape_) + " does not hold " +
                                                  std::to_string(data_.size()) + " values");
    }

    const shape_t& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }
    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    std::vector<double>& storage() noexcept { return data_; }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    /// Same values under a new shape of equal element count.
    tensor reshaped(shape_t shape) const
    {
        if (product(shape) != data_.size())
            throw error(errc::shape_mismatch, "cannot reshape " + nn::to_string(shape_) + " to " + nn::to_string(shape));
        return tensor(std::move(shape), data_);
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const
    {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    bool operator==(const tensor&) const = default;

private:
    shape_t shape_;
    std::vector<double> data_;
};

/// Leading (batch) extent and the per-sample shape after it.
inline std::pair<std::size_t, shape_t> split_batch(const shape_t& shape)
{
    if (shape.empty())
        throw error(errc::shape_mismatch, "expected a batched tensor");
    return {shape[0], shape_t(shape.begin() + 1, shape.end())};
}

inline shape_t with_batch(std::size_t n, const shape_t& sample)
{
    shape_t out{n};
    out.insert(out.end(), sample.begin(), sample.end());
    return out;
}

} // namespace malfox::nn

#endif // MALFOX_NN_TENSOR_HPP
