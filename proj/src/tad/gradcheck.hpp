#pragma once

#include "tad/tape.hpp"

#include <functional>

namespace detours::tad {

// Central-difference gradient verification, f64 only. The loss builder
// must reconstruct the graph from the current parameter values on every
// call. Large tensors are spot-checked on sampled coordinates (at least
// min_coords per tensor); rel err = |a - n| / max(1e-8, |a| + |n|).
struct GradCheckResult {
    double max_rel_err = 0.0;
    std::string worst_param;
    size_t coords_checked = 0;
};

inline GradCheckResult grad_check(const std::function<Var<double>(Tape<double>&)>& loss_builder,
                                  const std::vector<std::pair<std::string, Var<double>>>& params,
                                  double eps = 1e-5, size_t min_coords = 64, uint64_t seed = 0) {
    std::vector<Var<double>> plist;
    plist.reserve(params.size());
    for (const auto& [name, p] : params) plist.push_back(p);

    zero_grad(plist);
    std::vector<Tensor<double>> analytic;
    {
        Tape<double> tape(true);
        auto loss = loss_builder(tape);
        tape.backward(loss);
        for (const auto& p : plist) analytic.push_back(p->grad);
    }

    auto eval = [&]() {
        Tape<double> tape(false);
        return loss_builder(tape)->value.scalar();
    };

    Rng rng(seed ^ 0x9e3779b9ull);
    GradCheckResult res;
    for (size_t pi = 0; pi < plist.size(); ++pi) {
        auto& p = plist[pi];
        const size_t n = p->value.numel();
        std::vector<size_t> coords;
        if (n <= min_coords) {
            for (size_t i = 0; i < n; ++i) coords.push_back(i);
        } else {
            for (size_t i = 0; i < min_coords; ++i)
                coords.push_back(static_cast<size_t>(rng.next_u64() % n));
        }
        for (size_t c : coords) {
            const double orig = p->value.data[c];
            p->value.data[c] = orig + eps;
            const double fp = eval();
            p->value.data[c] = orig - eps;
            const double fm = eval();
            p->value.data[c] = orig;
            const double numeric = (fp - fm) / (2.0 * eps);
            const double a = analytic[pi].data[c];
            const double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
            ++res.coords_checked;
            if (rel > res.max_rel_err) {
                res.max_rel_err = rel;
                res.worst_param = params[pi].first;
            }
        }
    }
    return res;
}

} // namespace detours::tad
