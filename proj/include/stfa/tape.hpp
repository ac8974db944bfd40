#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "stfa/tensor.hpp"

namespace stfa {

// Reverse-mode autodiff over a flat tape. Every op computes its value
// eagerly and records one backward closure; backward() replays the
// closures in reverse recording order, accumulating into Tensor::grad.
//
// No broadcasting anywhere: elementwise ops demand identical shapes and
// fail loudly otherwise. All ops are deterministic.
class Tape {
public:
    // the core differentiable ops
    TensorPtr matmul(TensorPtr a, TensorPtr b);                      // [m,k]x[k,n]
    TensorPtr conv2d(TensorPtr x, TensorPtr k, int stride, int pad); // cross-correlation
    TensorPtr softmax(TensorPtr x, int axis);
    TensorPtr sigmoid(TensorPtr x);
    TensorPtr relu(TensorPtr x);
    TensorPtr add(TensorPtr a, TensorPtr b);
    TensorPtr mul(TensorPtr a, TensorPtr b);                         // elementwise
    TensorPtr mean(TensorPtr x);                                     // -> scalar
    TensorPtr upsample_nearest(TensorPtr x, int factor);             // [C,H,W]
    TensorPtr upsample_nearest(TensorPtr x, int fy, int fx);
    TensorPtr mse_loss(TensorPtr pred, TensorPtr target);            // -> scalar

    // support ops the pipeline is built from
    TensorPtr scale(TensorPtr x, double c);
    TensorPtr div_scalar(TensorPtr x, double c);
    TensorPtr add_rowwise(TensorPtr x, TensorPtr bias);      // [m,n] + [n]
    TensorPtr add_channel_bias(TensorPtr x, TensorPtr bias); // [C,H,W] + [C]
    TensorPtr channel_scale(TensorPtr x, TensorPtr map);     // [C,H,W] .* [H,W]
    TensorPtr concat0(const std::vector<TensorPtr>& xs);     // along axis 0
    TensorPtr slice0(TensorPtr x, int begin, int end);       // rows [begin,end)
    TensorPtr reshape(TensorPtr x, Shape shape);
    TensorPtr transpose2d(TensorPtr x);
    TensorPtr gather(TensorPtr x, std::shared_ptr<const std::vector<std::int64_t>> idx,
                     Shape out_shape);                       // out[i] = x[idx[i]]
    TensorPtr avg_pool(TensorPtr x, int kh, int kw, int sh, int sw);
    TensorPtr avg_pool(TensorPtr x, int kernel, int stride);
    TensorPtr global_avg_pool(TensorPtr x);                  // [C,H,W] -> [C]
    TensorPtr dot_all(TensorPtr x, TensorPtr w);             // scalar sum(x.*w)

    // Escape hatch: register an externally computed op with its own backward
    // rule (used by tests to inject faulty gradients).
    TensorPtr custom(TensorPtr out, std::function<void()> backward);

    void backward(TensorPtr root);  // root must be scalar
    std::size_t size() const { return steps_.size(); }
    void clear() { steps_.clear(); }

private:
    void record(std::function<void()> fn) { steps_.push_back(std::move(fn)); }
    std::vector<std::function<void()>> steps_;
};

struct GradCheckReport {
    std::string op;
    double max_rel_err = 0.0;
    bool pass = false;  // max_rel_err < 1e-4
};

using OpFn = std::function<TensorPtr(Tape&, const std::vector<TensorPtr>&)>;

// Central-difference verification of an op's backward rules. The output is
// scalarized as sum(w .* out) with fixed weights (seeded pseudo-random by
// default), one reverse pass gives the analytic gradients, then every input
// coordinate is perturbed by +/-eps. Relative error uses denominator
// max(|analytic|, |numeric|, 1e-8); pass threshold is 1e-4.
// eps must lie in [1e-7, 1e-3].
GradCheckReport grad_check(const std::string& name, const OpFn& fn,
                           const std::vector<TensorPtr>& inputs, double eps,
                           const Tensor* weights = nullptr,
                           std::uint64_t weight_seed = 0x5757u);

}  // namespace stfa
