#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace stfa {

class Rng;

using Shape = std::vector<int>;

std::int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// N-dimensional double-precision array, row-major. Data is treated as
// immutable once an op has produced it; only the grad buffer is mutated
// (by Tape::backward).
struct Tensor {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until ensure_grad()

    Tensor() = default;
    Tensor(Shape s, std::vector<double> d);
    explicit Tensor(Shape s);  // zero-filled

    std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    int rank() const { return static_cast<int>(shape.size()); }

    void ensure_grad();
    void zero_grad();
    bool all_finite() const;
};

using TensorPtr = std::shared_ptr<Tensor>;

TensorPtr tensor(Shape shape, std::vector<double> data);
TensorPtr zeros(Shape shape);
TensorPtr full(Shape shape, double value);
TensorPtr scalar(double value);  // shape {1}
TensorPtr rand_uniform(Shape shape, Rng& rng, double lo, double hi);

// Throws std::invalid_argument naming the op and both shapes.
void check_same_shape(const char* op, const Tensor& a, const Tensor& b);

}  // namespace stfa
