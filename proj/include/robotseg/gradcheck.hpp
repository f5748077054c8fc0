#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "robotseg/tensor.hpp"

namespace robotseg {

// Central-difference check of d(f)/d(inputs). f must be a pure function of the
// given tensors (re-runnable, deterministic) returning a scalar. Returns the
// worst per-element relative error across all inputs. For expensive functions
// max_probes_per_input caps the number of probed coordinates per tensor
// (a deterministic shuffle picks them); 0 probes everything.
inline double finite_diff_check(std::vector<Tensor> inputs, const std::function<Tensor()>& f,
                                double h = 1e-5, std::size_t max_probes_per_input = 0,
                                std::uint64_t probe_seed = 12345) {
    for (Tensor& t : inputs) {
        t.set_requires_grad(true);
        t.zero_grad();
    }
    std::vector<std::vector<double>> analytic;
    {
        Tape tape;
        Tensor loss = f();
        tape.backward(loss);
    }
    for (Tensor& t : inputs) analytic.push_back(t.grad().data());

    std::mt19937_64 rng(probe_seed);
    double worst = 0.0;
    for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
        Tensor& t = inputs[ti];
        std::vector<std::size_t> coords(t.size());
        std::iota(coords.begin(), coords.end(), std::size_t{0});
        if (max_probes_per_input > 0 && coords.size() > max_probes_per_input) {
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(max_probes_per_input);
        }
        for (std::size_t i : coords) {
            double saved = t.data()[i];
            t.data()[i] = saved + h;
            double lp = f().item();
            t.data()[i] = saved - h;
            double lm = f().item();
            t.data()[i] = saved;
            double numeric = (lp - lm) / (2.0 * h);
            double ga = analytic[ti][i];
            double err = std::fabs(ga - numeric) / std::max(1e-6, std::fabs(ga) + std::fabs(numeric));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

}  // namespace robotseg
