#pragma once

#include <map>
#include <random>
#include <string>

#include "robotseg/tensor.hpp"

namespace robotseg {

// Named learnable tensors, iterated in name order everywhere (init, update,
// serialization) so runs are reproducible.
class ParamRegistry {
public:
    // Uniform(-1,1)/sqrt(fan_in) init, grad-enabled.
    Tensor create(const std::string& name, Shape shape, std::size_t fan_in, std::mt19937_64& rng);
    // Constant init, grad-enabled.
    Tensor create_const(const std::string& name, Shape shape, double fill);

    Tensor& get(const std::string& name);
    const Tensor& get(const std::string& name) const;
    bool has(const std::string& name) const { return params_.count(name) != 0; }
    std::size_t count() const { return params_.size(); }

    std::map<std::string, Tensor>& all() { return params_; }
    const std::map<std::string, Tensor>& all() const { return params_; }

    void zero_grad();

    void save(const std::string& path) const;
    // Strict: every file entry must match a registered name and shape, and
    // every registered parameter must be present in the file.
    void load(const std::string& path);

private:
    std::map<std::string, Tensor> params_;
};

}  // namespace robotseg
