#ifndef MALFOX_NN_CHECKPOINT_HPP
#define MALFOX_NN_CHECKPOINT_HPP

// Checkpoint layout, all integers u32 little-endian, reals f64 little-endian:
//
//   "MFOXNN1"                       7 bytes
//   version                         u32 (= 1)
//   input rank, input dims...
//   layer count
//   per layer:
//     kind tag
//     hyper count, hypers...        f64
//     tensor count                  parameters first, then buffers
//     per tensor: rank, dims..., values...

#include <malfox/bytes.hpp>
#include <malfox/error.hpp>
#include <malfox/nn/layers.hpp>
#include <malfox/nn/net.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <string_view>

namespace malfox::nn {

inline constexpr std::string_view checkpoint_magic = "MFOXNN1";
inline constexpr std::uint32_t checkpoint_version = 1;

namespace detail {

inline void put_f64(byte_vector& out, double v) { append_le64(out, std::bit_cast<std::uint64_t>(v)); }

inline void put_u32(byte_vector& out, std::size_t v)
{
    if (v > 0xffffffffu)
        throw error(errc::format_error, "value does not fit a u32 checkpoint field");
    append_le32(out, static_cast<std::uint32_t>(v));
}

class checkpoint_reader {
public:
    explicit checkpoint_reader(byte_span b) : b_(b) {}

    std::uint32_t u32()
    {
        need(4);
        const auto v = load_le32(b_, pos_);
        pos_ += 4;
        return v;
    }
    double f64()
    {
        need(8);
        const auto v = std::bit_cast<double>(load_le64(b_, pos_));
        pos_ += 8;
        return v;
    }
    void expect(std::string_view magic)
    {
        need(magic.size());
        if (std::memcmp(b_.data() + pos_, magic.data(), magic.size()) != 0)
            throw error(errc::bad_magic, "not a checkpoint", 0);
        pos_ += magic.size();
    }
    bool at_end() const noexcept { return pos_ == b_.size(); }
    std::size_t position() const noexcept { return pos_; }

private:
    void need(std::size_t n) const
    {
        if (pos_ + n > b_.size())
            throw error(errc::truncated, "checkpoint ends early", pos_);
    }

    byte_span b_;
    std::size_t pos_ = 0;
};

} // namespace detail

inline byte_vector save_checkpoint(net& model)
{
    if (!model.initialized())
        throw error(errc::invariant_violation, "cannot checkpoint an uninitialized net");
    byte_vector out(checkpoint_magic.begin(), checkpoint_magic.end());
    detail::put_u32(out, checkpoint_version);
    detail::put_u32(out, model.input_shape().size());
    for (auto d : model.input_shape())
        detail::put_u32(out, d);
    detail::put_u32(out, model.layer_count());
    for (std::size_t i = 0; i < model.layer_count(); ++i) {
        auto& l = model.at(i);
        detail::put_u32(out, static_cast<std::uint32_t>(l.kind()));
        const auto h = l.hyper();
        detail::put_u32(out, h.size());
        for (double v : h)
            detail::put_f64(out, v);
        auto tensors = l.parameters();
        for (auto* b : l.buffers())
            tensors.push_back(b);
        detail::put_u32(out, tensors.size());
        for (auto* t : tensors) {
            detail::put_u32(out, t->rank());
            for (auto d : t->shape())
                detail::put_u32(out, d);
            for (double v : t->values())
                detail::put_f64(out, v);
        }
    }
    return out;
}

inline net load_checkpoint(byte_span bytes)
{
    detail::checkpoint_reader in(bytes);
    in.expect(checkpoint_magic);
    if (const auto v = in.u32(); v != checkpoint_version)
        throw error(errc::format_error, "unsupported checkpoint version " + std::to_string(v));
    const auto read_shape = [&](std::uint32_t rank) {
        if (rank > 8)
            throw error(errc::format_error, "tensor rank " + std::to_string(rank) + " is implausible", in.position());
        shape_t s(rank);
        for (auto& d : s)
            d = in.u32();
        return s;
    };
    net model(read_shape(in.u32()));

    struct record {
        std::vector<shape_t> shapes;
        std::vector<std::vector<double>> values;
    };
    std::vector<record> records;
    const auto layer_count = in.u32();
    for (std::uint32_t i = 0; i < layer_count; ++i) {
        const auto kind = static_cast<layer_kind>(in.u32());
        std::vector<double> h(in.u32());
        for (auto& v : h)
            v = in.f64();
        model.add(make_layer(kind, h));
        record rec;
        const auto tensor_count = in.u32();
        for (std::uint32_t t = 0; t < tensor_count; ++t) {
            auto shape = read_shape(in.u32());
            std::vector<double> values(product(shape));
            for (auto& v : values)
                v = in.f64();
            rec.shapes.push_back(std::move(shape));
            rec.values.push_back(std::move(values));
        }
        records.push_back(std::move(rec));
    }
    if (!in.at_end())
        throw error(errc::format_error, "trailing bytes after checkpoint", in.position());

    model.plan();
    model.initialize(0);
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto& l = model.at(i);
        auto tensors = l.parameters();
        for (auto* b : l.buffers())
            tensors.push_back(b);
        if (tensors.size() != records[i].shapes.size())
            throw error(errc::format_error, "layer " + std::to_string(i) + " tensor count mismatch");
        for (std::size_t t = 0; t < tensors.size(); ++t) {
            if (tensors[t]->shape() != records[i].shapes[t])
                throw error(errc::format_error, "layer " + std::to_string(i) + " tensor shape " +
                                                    to_string(records[i].shapes[t]) + " does not fit the net");
            *tensors[t] = tensor(records[i].shapes[t], std::move(records[i].values[t]));
        }
    }
    return model;
}

} // namespace malfox::nn

#endif // MALFOX_NN_CHECKPOINT_HPP
