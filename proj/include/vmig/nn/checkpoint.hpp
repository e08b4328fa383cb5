#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vmig/error.hpp"
#include "vmig/nn/adam.hpp"
#include "vmig/nn/dense_net.hpp"

namespace vmig::nn {

// Binary checkpoint, little-endian:
//
//   char[8]  magic "VMIGCKPT"
//   u32      version (1)
//   u32      entry count
//   per entry:
//     u32 name length, name bytes
//     u32 width count, i32 widths[]
//     u8  hidden activation, u8 output activation
//     u64 parameter count, f64 parameters[]
//     u8  optimizer present
//     if present: f64 lr, beta1, beta2, epsilon; i64 step; f64 m[]; f64 v[]
static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline constexpr char kCheckpointMagic[8] = {'V', 'M', 'I', 'G', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointEntry {
    std::string name;
    DenseNet net;
    std::optional<AdamState> optimizer;
};

namespace detail {

template <class T>
void put(std::string& out, const T& value) {
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.append(buf, sizeof(T));
}

inline void put_doubles(std::string& out, const Eigen::VectorXd& v) {
    out.append(reinterpret_cast<const char*>(v.data()), static_cast<std::size_t>(v.size()) * sizeof(double));
}

class Reader {
public:
    explicit Reader(const std::string& data) : data_(data) {}

    template <class T>
    T get() {
        need(sizeof(T));
        T value;
        std::memcpy(&value, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }

    Eigen::VectorXd doubles(std::uint64_t n) {
        need(n * sizeof(double));
        Eigen::VectorXd v(static_cast<Eigen::Index>(n));
        std::memcpy(v.data(), data_.data() + pos_, n * sizeof(double));
        pos_ += n * sizeof(double);
        return v;
    }

    std::string bytes(std::size_t n) {
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    bool at_end() const { return pos_ == data_.size(); }

private:
    void need(std::size_t n) const {
        if (pos_ + n > data_.size()) throw IoError("checkpoint: truncated data");
    }
    const std::string& data_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_checkpoint(const std::vector<CheckpointEntry>& entries) {
    std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
    detail::put(out, kCheckpointVersion);
    detail::put(out, static_cast<std::uint32_t>(entries.size()));
    for (const auto& e : entries) {
        detail::put(out, static_cast<std::uint32_t>(e.name.size()));
        out += e.name;
        detail::put(out, static_cast<std::uint32_t>(e.net.widths().size()));
        for (int w : e.net.widths()) detail::put(out, static_cast<std::int32_t>(w));
        detail::put(out, static_cast<std::uint8_t>(e.net.hidden_activation()));
        detail::put(out, static_cast<std::uint8_t>(e.net.output_activation()));
        detail::put(out, static_cast<std::uint64_t>(e.net.num_params()));
        detail::put_doubles(out, e.net.params());
        detail::put(out, static_cast<std::uint8_t>(e.optimizer.has_value()));
        if (e.optimizer) {
            const auto& o = *e.optimizer;
            detail::put(out, o.config.learning_rate);
            detail::put(out, o.config.beta1);
            detail::put(out, o.config.beta2);
            detail::put(out, o.config.epsilon);
            detail::put(out, static_cast<std::int64_t>(o.step));
            detail::put_doubles(out, o.m);
            detail::put_doubles(out, o.v);
        }
    }
    return out;
}

inline std::vector<CheckpointEntry> deserialize_checkpoint(const std::string& data) {
    detail::Reader in(data);
    if (in.bytes(sizeof(kCheckpointMagic)) != std::string(kCheckpointMagic, sizeof(kCheckpointMagic)))
        throw IoError("checkpoint: bad magic");
    const auto version = in.get<std::uint32_t>();
    if (version != kCheckpointVersion) throw IoError("checkpoint: unsupported version " + std::to_string(version));
    const auto count = in.get<std::uint32_t>();
    std::vector<CheckpointEntry> entries;
    for (std::uint32_t i = 0; i < count; ++i) {
        CheckpointEntry e;
        e.name = in.bytes(in.get<std::uint32_t>());
        std::vector<int> widths(in.get<std::uint32_t>());
        for (int& w : widths) w = in.get<std::int32_t>();
        const auto hidden = static_cast<Activation>(in.get<std::uint8_t>());
        const auto output = static_cast<Activation>(in.get<std::uint8_t>());
        e.net = DenseNet(widths, hidden, output);
        const auto n = in.get<std::uint64_t>();
        if (static_cast<Eigen::Index>(n) != e.net.num_params())
            throw IoError("checkpoint: parameter count does not match layer widths for '" + e.name + "'");
        e.net.set_params(in.doubles(n));
        if (in.get<std::uint8_t>() != 0) {
            AdamState o;
            o.config.learning_rate = in.get<double>();
            o.config.beta1 = in.get<double>();
            o.config.beta2 = in.get<double>();
            o.config.epsilon = in.get<double>();
            o.step = in.get<std::int64_t>();
            o.m = in.doubles(n);
            o.v = in.doubles(n);
            e.optimizer = std::move(o);
        }
        entries.push_back(std::move(e));
    }
    if (!in.at_end()) throw IoError("checkpoint: trailing bytes");
    return entries;
}

inline void save_checkpoint(const std::string& path, const std::vector<CheckpointEntry>& entries) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("checkpoint: cannot open '" + path + "' for writing");
    const auto bytes = serialize_checkpoint(entries);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("checkpoint: write failed for '" + path + "'");
}

inline std::vector<CheckpointEntry> load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("checkpoint: cannot open '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return deserialize_checkpoint(ss.str());
}

}  // namespace vmig::nn
