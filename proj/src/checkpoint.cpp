#include "robotseg/checkpoint.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>

#include "robotseg/rng.hpp"

namespace robotseg {

Tensor ParamRegistry::create(const std::string& name, Shape shape, std::size_t fan_in,
                             std::mt19937_64& rng) {
    if (params_.count(name)) throw ContractError("duplicate parameter name: " + name);
    if (fan_in == 0) throw ContractError("fan_in must be positive for " + name);
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor t(shape, 0.0);
    for (double& v : t.data()) v = rng_uniform(rng, -bound, bound);
    t.set_requires_grad(true);
    params_.emplace(name, t);
    return t;
}

Tensor ParamRegistry::create_const(const std::string& name, Shape shape, double fill) {
    if (params_.count(name)) throw ContractError("duplicate parameter name: " + name);
    Tensor t(shape, fill);
    t.set_requires_grad(true);
    params_.emplace(name, t);
    return t;
}

Tensor& ParamRegistry::get(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw ContractError("unknown parameter: " + name);
    return it->second;
}

const Tensor& ParamRegistry::get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ContractError("unknown parameter: " + name);
    return it->second;
}

void ParamRegistry::zero_grad() {
    for (auto& [name, t] : params_) t.zero_grad();
}

namespace {

constexpr char kMagic[4] = {'R', 'S', 'G', '1'};

void write_u32(std::ofstream& f, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    f.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::ifstream& f, const std::string& path) {
    unsigned char b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    if (!f) throw IoError("truncated checkpoint: " + path);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_f64(std::ofstream& f, double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
    f.write(reinterpret_cast<const char*>(b), 8);
}

double read_f64(std::ifstream& f, const std::string& path) {
    unsigned char b[8];
    f.read(reinterpret_cast<char*>(b), 8);
    if (!f) throw IoError("truncated checkpoint: " + path);
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
}

}  // namespace

void ParamRegistry::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for write: " + path);
    f.write(kMagic, 4);
    for (const auto& [name, t] : params_) {
        write_u32(f, static_cast<std::uint32_t>(name.size()));
        f.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(f, static_cast<std::uint32_t>(t.rank()));
        for (std::size_t d : t.shape()) write_u32(f, static_cast<std::uint32_t>(d));
        for (double v : t.data()) write_f64(f, v);
    }
    if (!f) throw IoError("write failed: " + path);
}

void ParamRegistry::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("not a checkpoint file (bad magic): " + path);

    std::set<std::string> seen;
    while (true) {
        f.peek();
        if (f.eof()) break;
        std::uint32_t name_len = read_u32(f, path);
        std::string name(name_len, '\0');
        f.read(name.data(), name_len);
        if (!f) throw IoError("truncated checkpoint: " + path);
        std::uint32_t rank = read_u32(f, path);
        Shape shape(rank);
        for (std::uint32_t i = 0; i < rank; ++i) shape[i] = read_u32(f, path);

        auto it = params_.find(name);
        if (it == params_.end())
            throw IoError("checkpoint has unknown parameter '" + name + "': " + path);
        Tensor& t = it->second;
        if (t.shape() != shape)
            throw IoError("checkpoint shape " + shape_str(shape) + " for '" + name +
                          "' does not match " + shape_str(t.shape()) + ": " + path);
        for (double& v : t.data()) v = read_f64(f, path);
        seen.insert(name);
    }
    for (const auto& [name, t] : params_)
        if (!seen.count(name)) throw IoError("checkpoint missing parameter '" + name + "': " + path);
}

}  // namespace robotseg
