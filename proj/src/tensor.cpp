#include "stfa/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "stfa/rng.hpp"

namespace stfa {

std::int64_t numel(const Shape& shape) {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

static void validate_shape(const Shape& s) {
    if (s.empty()) throw std::invalid_argument("tensor: empty shape");
    for (int d : s) {
        if (d <= 0) throw std::invalid_argument("tensor: non-positive extent in " + shape_str(s));
    }
}

Tensor::Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    validate_shape(shape);
    if (numel(shape) != size()) {
        throw std::invalid_argument("tensor: shape " + shape_str(shape) + " does not match data length " +
                                    std::to_string(data.size()));
    }
}

Tensor::Tensor(Shape s) : shape(std::move(s)) {
    validate_shape(shape);
    data.assign(static_cast<std::size_t>(numel(shape)), 0.0);
}

void Tensor::ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
}

void Tensor::zero_grad() {
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
}

bool Tensor::all_finite() const {
    for (double v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

TensorPtr tensor(Shape shape, std::vector<double> data) {
    return std::make_shared<Tensor>(std::move(shape), std::move(data));
}

TensorPtr zeros(Shape shape) { return std::make_shared<Tensor>(std::move(shape)); }

TensorPtr full(Shape shape, double value) {
    auto t = zeros(std::move(shape));
    std::fill(t->data.begin(), t->data.end(), value);
    return t;
}

TensorPtr scalar(double value) { return tensor({1}, {value}); }

TensorPtr rand_uniform(Shape shape, Rng& rng, double lo, double hi) {
    auto t = zeros(std::move(shape));
    for (double& v : t->data) v = rng.uniform(lo, hi);
    return t;
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape != b.shape) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape) + " vs " +
                                    shape_str(b.shape));
    }
}

}  // namespace stfa
