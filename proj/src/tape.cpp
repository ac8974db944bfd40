#include "stfa/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "stfa/rng.hpp"

namespace stfa {

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

// Backward closures run even for tensors off the path to the root; a tensor
// that never received gradient keeps an empty grad buffer, which means zero.
bool no_grad(const TensorPtr& t) { return t->grad.empty(); }

// Copy of x with `pad` zero rows/cols around every channel.
std::vector<double> pad_channels(const Tensor& x, int pad) {
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int ph = h + 2 * pad, pw = w + 2 * pad;
    std::vector<double> out(static_cast<std::size_t>(c) * ph * pw, 0.0);
    for (int ci = 0; ci < c; ++ci) {
        for (int y = 0; y < h; ++y) {
            const double* src = x.data.data() + (static_cast<std::size_t>(ci) * h + y) * w;
            double* dst = out.data() + (static_cast<std::size_t>(ci) * ph + y + pad) * pw + pad;
            std::copy(src, src + w, dst);
        }
    }
    return out;
}

}  // namespace

TensorPtr Tape::matmul(TensorPtr a, TensorPtr b) {
    require(a->rank() == 2 && b->rank() == 2,
            "matmul: expected rank-2 operands, got " + shape_str(a->shape) + " and " + shape_str(b->shape));
    require(a->dim(1) == b->dim(0),
            "matmul: inner extents disagree, " + shape_str(a->shape) + " vs " + shape_str(b->shape));
    const int m = a->dim(0), k = a->dim(1), n = b->dim(1);
    auto out = zeros({m, n});
    for (int i = 0; i < m; ++i) {
        const double* arow = a->data.data() + static_cast<std::size_t>(i) * k;
        double* orow = out->data.data() + static_cast<std::size_t>(i) * n;
        for (int t = 0; t < k; ++t) {
            const double av = arow[t];
            const double* brow = b->data.data() + static_cast<std::size_t>(t) * n;
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    record([a, b, out, m, k, n]() {
        if (no_grad(out)) return;
        a->ensure_grad();
        b->ensure_grad();
        // da = g . b^T ; db = a^T . g
        for (int i = 0; i < m; ++i) {
            const double* grow = out->grad.data() + static_cast<std::size_t>(i) * n;
            double* darow = a->grad.data() + static_cast<std::size_t>(i) * k;
            const double* arow = a->data.data() + static_cast<std::size_t>(i) * k;
            for (int t = 0; t < k; ++t) {
                const double* brow = b->data.data() + static_cast<std::size_t>(t) * n;
                double* dbrow = b->grad.data() + static_cast<std::size_t>(t) * n;
                double acc = 0.0;
                const double av = arow[t];
                for (int j = 0; j < n; ++j) {
                    acc += grow[j] * brow[j];
                    dbrow[j] += av * grow[j];
                }
                darow[t] += acc;
            }
        }
    });
    return out;
}

TensorPtr Tape::conv2d(TensorPtr x, TensorPtr k, int stride, int pad) {
    require(x->rank() == 3, "conv2d: input must be [C,H,W], got " + shape_str(x->shape));
    require(k->rank() == 4, "conv2d: kernels must be [Cout,Cin,kh,kw], got " + shape_str(k->shape));
    require(stride >= 1, "conv2d: stride must be positive");
    require(pad >= 0, "conv2d: pad must be non-negative");
    const int cin = x->dim(0), h = x->dim(1), w = x->dim(2);
    const int cout = k->dim(0), kh = k->dim(2), kw = k->dim(3);
    require(k->dim(1) == cin, "conv2d: kernel expects " + std::to_string(k->dim(1)) + " input channels, input has " +
                                  std::to_string(cin) + " (" + shape_str(x->shape) + " vs " + shape_str(k->shape) + ")");
    const int ph = h + 2 * pad, pw = w + 2 * pad;
    require(kh <= ph && kw <= pw, "conv2d: kernel larger than padded input");
    require((ph - kh) % stride == 0 && (pw - kw) % stride == 0,
            "conv2d: non-integral output extent for input " + shape_str(x->shape) + ", kernel " + shape_str(k->shape) +
                ", stride " + std::to_string(stride) + ", pad " + std::to_string(pad));
    const int oh = (ph - kh) / stride + 1, ow = (pw - kw) / stride + 1;

    auto padded = std::make_shared<std::vector<double>>(pad_channels(*x, pad));
    auto out = zeros({cout, oh, ow});
    for (int co = 0; co < cout; ++co) {
        double* ochan = out->data.data() + static_cast<std::size_t>(co) * oh * ow;
        for (int ci = 0; ci < cin; ++ci) {
            const double* pchan = padded->data() + static_cast<std::size_t>(ci) * ph * pw;
            const double* kbase = k->data.data() + (static_cast<std::size_t>(co) * cin + ci) * kh * kw;
            for (int ky = 0; ky < kh; ++ky) {
                for (int kx = 0; kx < kw; ++kx) {
                    const double kv = kbase[ky * kw + kx];
                    if (kv == 0.0) continue;
                    for (int oy = 0; oy < oh; ++oy) {
                        const double* prow = pchan + static_cast<std::size_t>(oy * stride + ky) * pw + kx;
                        double* orow = ochan + static_cast<std::size_t>(oy) * ow;
                        if (stride == 1) {
                            for (int ox = 0; ox < ow; ++ox) orow[ox] += kv * prow[ox];
                        } else {
                            for (int ox = 0; ox < ow; ++ox) orow[ox] += kv * prow[ox * stride];
                        }
                    }
                }
            }
        }
    }
    record([x, k, out, padded, stride, pad, cin, h, w, cout, kh, kw, oh, ow, ph, pw]() {
        if (no_grad(out)) return;
        x->ensure_grad();
        k->ensure_grad();
        std::vector<double> pgrad(padded->size(), 0.0);
        for (int co = 0; co < cout; ++co) {
            const double* gchan = out->grad.data() + static_cast<std::size_t>(co) * oh * ow;
            for (int ci = 0; ci < cin; ++ci) {
                const double* pchan = padded->data() + static_cast<std::size_t>(ci) * ph * pw;
                double* pgchan = pgrad.data() + static_cast<std::size_t>(ci) * ph * pw;
                const std::size_t koff = (static_cast<std::size_t>(co) * cin + ci) * kh * kw;
                for (int ky = 0; ky < kh; ++ky) {
                    for (int kx = 0; kx < kw; ++kx) {
                        const double kv = k->data[koff + ky * kw + kx];
                        double kacc = 0.0;
                        for (int oy = 0; oy < oh; ++oy) {
                            const double* grow = gchan + static_cast<std::size_t>(oy) * ow;
                            const std::size_t prow = static_cast<std::size_t>(oy * stride + ky) * pw + kx;
                            for (int ox = 0; ox < ow; ++ox) {
                                const double g = grow[ox];
                                kacc += g * pchan[prow + ox * stride];
                                pgchan[prow + ox * stride] += kv * g;
                            }
                        }
                        k->grad[koff + ky * kw + kx] += kacc;
                    }
                }
            }
        }
        // un-pad
        for (int ci = 0; ci < cin; ++ci) {
            for (int y = 0; y < h; ++y) {
                const double* src = pgrad.data() + (static_cast<std::size_t>(ci) * ph + y + pad) * pw + pad;
                double* dst = x->grad.data() + (static_cast<std::size_t>(ci) * h + y) * w;
                for (int xx = 0; xx < w; ++xx) dst[xx] += src[xx];
            }
        }
    });
    return out;
}

TensorPtr Tape::softmax(TensorPtr x, int axis) {
    require(axis >= 0 && axis < x->rank(),
            "softmax: axis " + std::to_string(axis) + " invalid for " + shape_str(x->shape));
    const int n = x->dim(axis);
    std::int64_t inner = 1, outer = 1;
    for (int i = axis + 1; i < x->rank(); ++i) inner *= x->dim(i);
    for (int i = 0; i < axis; ++i) outer *= x->dim(i);

    auto out = zeros(x->shape);
    for (std::int64_t o = 0; o < outer; ++o) {
        for (std::int64_t in = 0; in < inner; ++in) {
            const std::int64_t base = o * n * inner + in;
            double mx = x->data[base];
            for (int i = 1; i < n; ++i) mx = std::max(mx, x->data[base + i * inner]);
            double sum = 0.0;
            for (int i = 0; i < n; ++i) {
                const double e = std::exp(x->data[base + i * inner] - mx);
                out->data[base + i * inner] = e;
                sum += e;
            }
            for (int i = 0; i < n; ++i) out->data[base + i * inner] /= sum;
        }
    }
    record([x, out, n, inner, outer]() {
        if (no_grad(out)) return;
        x->ensure_grad();
        for (std::int64_t o = 0; o < outer; ++o) {
            for (std::int64_t in = 0; in < inner; ++in) {
                const std::int64_t base = o * n * inner + in;
                double dot = 0.0;
                for (int i = 0; i < n; ++i) dot += out->grad[base + i * inner] * out->data[base + i * inner];
                for (int i = 0; i < n; ++i) {
                    const std::int64_t p = base + i * inner;
                    x->grad[p] += out->data[p] * (out->grad[p] - dot);
                }
            }
        }
    });
    return out;
}

TensorPtr Tape::sigmoid(TensorPtr x) {
    auto out = zeros(x->shape);
    for (std::size_t i = 0; i < x->data.size(); ++i) {
        const double v = x->data[i];
        out->data[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    }
    record([x, out]() {
        if (no_grad(out)) return;
        x->ensure_grad();
        for (std::size_t i = 0; i < x->data.size(); ++i) {
            const double s = out->data[i];
            x->grad[i] += out->grad[i] * s * (1.0 - s);
        }
    });
    return out;
}

TensorPtr Tape::relu(TensorPtr x) {
    auto out = zeros(x->shape);
    for (std::size_t i = 0; i < x->data.size(); ++i) out->data[i] = x->data[i] > 0.0 ? x->data[i] : 0.0;
    record([x, out]() {
        if (no_grad(out)) return;
        x->ensure_grad();
        for (std::size_t i = 0; i < x->data.size(); ++i) {
            if (x->data[i] > 0.0) x->grad[i] += out->grad[i];
        }
    });
    return out;
}

TensorPtr Tape::add(TensorPtr a, TensorPtr b) {
    check_same_shape("add", *a, *b);
    auto out = zeros(a->shape);
    for (std::size_t i = 0; i < a->data.size(); ++i) out->data[i] = a->data[i] + b->data[i];
    record([a, b, out]() {
        if (no_grad(out)) return;
        a->ensure_grad();
        b->ensure_grad();
        for (std::size_t i = 0; i < out->grad.size(); ++i) {
            a->grad[i] += out->grad[i];
            b->grad[i] += out->grad[i];
        }
    });
    return out;
}

TensorPtr Tape::mul(TensorPtr a, TensorPtr b) {
    check_same_shape("mul_elementwise", *a, *b);
    auto out = zeros(a->shape);
    for (std::size_t i = 0; i < a->data.size(); ++i) out->data[i] = a->data[i] * b->data[i];
    record([a, b, out]() {
        if (no_grad(out)) return;
        a->ensure_grad();
        b->ensure_grad();
        for (std::size_t i = 0; i < out->grad.size(); ++i) {
            a->grad[i] += out->grad[i] * b->data[i];
            b->grad[i] += out->grad[i] * a->data[i];
        }
    });
    return out;
}

TensorPtr Tape::mean(TensorPtr x) {
    const double n = static_cast<double>(x->size());
    double acc = 0.0;
    for (double v : x->data) acc += v;
    auto out = scalar(acc / n);
    record([x, out, n]() {
        if (no_grad(out)) return;
        x->ensure_grad();
        const double g = out->grad[0] / n;
        for (std::size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += g;
    });
    return out;
}

TensorPtr Tape::upsample_nearest(TensorPtr x, int factor) { return upsample_nearest(x, factor, factor); }

TensorPtr Tape::upsample_nearest(TensorPtr x, int fy, int fx) {
    require(x->rank() == 3, "upsample_nearest: input must be [C,H,W], got " + shape_str(x->shape));
    require(fy >= 1 && fx >= 1, "upsample_nearest: factor must be positive");
    const int c = x->dim(0), h = x->dim(1), w = x->dim(2);
    const int oh = h * fy, ow = w * fx;
    auto out = zeros({c, oh, ow});
    for (int ci = 0; ci < c; ++ci) {
        for (int y = 0; y < oh; ++y) {
            const double* srow = x->data.data() + (static_cast<std::size_t>(ci) * h + y / fy) * w;
            double* drow = out->data.data() + (static_cast<std::size_t>(ci) * oh + y) * ow;
            for (int xx = 0; xx < ow; ++xx) drow[xx] = srow[xx / fx];
        }
    }
    record([x, out, c, h, w, oh, ow, fy, fx]() {
        if (no_grad(out)) return;
        x->ensure_grad();
        for (int ci = 0; ci < c; ++ci) {
            for (int y = 0; y < oh; ++y) {
                const double* grow = out->grad.data() + (static_cast<std::size_t>(ci) * oh + y) * ow;
                double* drow = x->grad.data() + (static_cast<std::size_t>(ci) * h + y / fy) * w;
                for (int xx = 0; xx < ow; ++xx) drow[xx / fx] += grow[xx];
            }
        }
    });
    return out;
}

TensorPtr Tape::mse_loss(TensorPtr pred, TensorPtr target) {
    check_same_shape("mse_loss", *pred, *target);
    const double n = static_cast<double>(pred->size());
    double acc = 0.0;
    for (std::size_t i = 0; i < pred->data.size(); ++i) {
        const double d = pred->data[i] - target->data[i];
        acc += d * d;
    }
    auto out = scalar(acc / n);
    record([pred, target, out, n]() {
        if (no_grad(out)) return;
        pred->ensure_grad();
        target->ensure_grad();
        const double g = out->grad[0] * 2.0 / n;
        for (std::size_t i = 0; i < pred->data.size(); ++i) {
            const double d = pred->data[i] - target->data[i];
            pred->grad[i] += g * d;
            target->grad[i] -= g * d;
        }
    });
    return out;
}

TensorPtr Tape::scale(TensorPtr x, double c) {
    auto out = zeros(x->shape);
    for (std::size_t i = 0; i < x->data.size(); ++i) out->data[i] = x->data[i] * c;
    record([x, out, c]() {
        if (no_grad(out)) return;
        x->ensure_grad();
        for (std::size_t i = 0; i < out->grad.size(); ++i) x->grad[i] += out->grad[i] * c;
    });
    return out;
}

TensorPtr Tape::div_scalar(TensorPtr x, double c) {
    require(c != 0.0, "div_scalar: division by zero");
    auto out = zeros(x->shape);
    for (std::size_t i = 0; i < x->data.size(); ++i) out->data[i] = x->data[i] / c;
    record([x, out, c]() {
        if (no_grad(out)) return;
        x->ensure_grad();
        for (std::size_t i = 0; i < out->grad.size(); ++i) x->grad[i] += out->grad[i] / c;
    });
    return out;
}

TensorPtr Tape::add_rowwise(TensorPtr x, TensorPtr bias) {
    require(x->rank() == 2, "add_rowwise: x must be rank-2, got " + shape_str(x->shape));
    require(bias->rank() == 1 && bias->dim(0) == x->dim(1),
            "add_rowwise: bias " + shape_str(bias->shape) + " does not match " + shape_str(x->shape));
    const int m = x->dim(0), n = x->dim(1);
    auto out = zeros(x->shape);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j)
            out->data[static_cast<std::size_t>(i) * n + j] = x->data[static_cast<std::size_t>(i) * n + j] + bias->data[j];
    }
    record([x, bias, out, m, n]() {
        if (no_grad(out)) return;
        x->ensure_grad();
        bias->ensure_grad();
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) {
                const double g = out->grad[static_cast<std::size_t>(i) * n + j];
                x->grad[static_cast<std::size_t>(i) * n + j] += g;
                bias->grad[j] += g;
            }
        }
    });
    return out;
}

TensorPtr Tape::add_channel_bias(TensorPtr x, TensorPtr bias) {
    require(x->rank() == 3, "add_channel_bias: x must be [C,H,W], got " + shape_str(x->shape));
    require(bias->rank() == 1 && bias->dim(0) == x->dim(0),
            "add_channel_bias: bias " + shape_str(bias->shape) + " does not match " + shape_str(x->shape));
    const int c = x->dim(0);
    const std::int64_t hw = static_cast<std::int64_t>(x->dim(1)) * x->dim(2);
    auto out = zeros(x->shape);
    for (int ci = 0; ci < c; ++ci) {
        const double b = bias->data[ci];
        for (std::int64_t i = 0; i < hw; ++i) out->data[ci * hw + i] = x->data[ci * hw + i] + b;
    }
    record([x, bias, out, c, hw]() {
        if (no_grad(out)) return;
        x->ensure_grad();
        bias->ensure_grad();
        for (int ci = 0; ci < c; ++ci) {
            double acc = 0.0;
            for (std::int64_t i = 0; i < hw; ++i) {
                const double g = out->grad[ci * hw + i];
                x->grad[ci * hw + i] += g;
                acc += g;
            }
            bias->grad[ci] += acc;
        }
    });
    return out;
}

TensorPtr Tape::channel_scale(TensorPtr x, TensorPtr map) {
    require(x->rank() == 3, "channel_scale: x must be [C,H,W], got " + shape_str(x->shape));
    require(map->rank() == 2 && map->dim(0) == x->dim(1) && map->dim(1) == x->dim(2),
            "channel_scale: map " + shape_str(map->shape) + " does not match " + shape_str(x->shape));
    const int c = x->dim(0);
    const std::int64_t hw = static_cast<std::int64_t>(x->dim(1)) * x->dim(2);
    auto out = zeros(x->shape);
    for (int ci = 0; ci < c; ++ci) {
        for (std::int64_t i = 0; i < hw; ++i) out->data[ci * hw + i] = x->data[ci * hw + i] * map->data[i];
    }
    record([x, map, out, c, hw]() {
        if (no_grad(out)) return;
        x->ensure_grad();
        map->ensure_grad();
        for (int ci = 0; ci < c; ++ci) {
            for (std::int64_t i = 0; i < hw; ++i) {
                const double g = out->grad[ci * hw + i];
                x->grad[ci * hw + i] += g * map->data[i];
                map->grad[i] += g * x->data[ci * hw + i];
            }
        }
    });
    return out;
}

TensorPtr Tape::concat0(const std::vector<TensorPtr>& xs) {
    require(!xs.empty(), "concat0: no inputs");
    const Shape& head = xs[0]->shape;
    int total = 0;
    for (const auto& t : xs) {
        require(t->rank() == static_cast<int>(head.size()), "concat0: rank mismatch");
        for (int i = 1; i < t->rank(); ++i)
            require(t->dim(i) == head[static_cast<std::size_t>(i)],
                    "concat0: trailing extents disagree, " + shape_str(t->shape) + " vs " + shape_str(head));
        total += t->dim(0);
    }
    Shape oshape = head;
    oshape[0] = total;
    auto out = zeros(oshape);
    std::size_t off = 0;
    for (const auto& t : xs) {
        std::copy(t->data.begin(), t->data.end(), out->data.begin() + static_cast<std::ptrdiff_t>(off));
        off += t->data.size();
    }
    record([xs, out]() {
        if (no_grad(out)) return;
        std::size_t off2 = 0;
        for (const auto& t : xs) {
            t->ensure_grad();
            for (std::size_t i = 0; i < t->data.size(); ++i) t->grad[i] += out->grad[off2 + i];
            off2 += t->data.size();
        }
    });
    return out;
}

TensorPtr Tape::slice0(TensorPtr x, int begin, int end) {
    require(begin >= 0 && end > begin && end <= x->dim(0),
            "slice0: range [" + std::to_string(begin) + "," + std::to_string(end) + ") invalid for " +
                shape_str(x->shape));
    Shape oshape = x->shape;
    oshape[0] = end - begin;
    const std::size_t stride = x->data.size() / static_cast<std::size_t>(x->dim(0));
    auto out = zeros(oshape);
    std::copy(x->data.begin() + static_cast<std::ptrdiff_t>(begin * stride),
              x->data.begin() + static_cast<std::ptrdiff_t>(end * stride), out->data.begin());
    record([x, out, begin, stride]() {
        if (no_grad(out)) return;
        x->ensure_grad();
        const std::size_t off = static_cast<std::size_t>(begin) * stride;
        for (std::size_t i = 0; i < out->grad.size(); ++i) x->grad[off + i] += out->grad[i];
    });
    return out;
}

TensorPtr Tape::reshape(TensorPtr x, Shape shape) {
    require(numel(shape) == x->size(),
            "reshape: cannot view " + shape_str(x->shape) + " as " + shape_str(shape));
    auto out = tensor(std::move(shape), x->data);
    record([x, out]() {
        if (no_grad(out)) return;
        x->ensure_grad();
        for (std::size_t i = 0; i < out->grad.size(); ++i) x->grad[i] += out->grad[i];
    });
    return out;
}

TensorPtr Tape::transpose2d(TensorPtr x) {
    require(x->rank() == 2, "transpose2d: expected rank-2, got " + shape_str(x->shape));
    const int m = x->dim(0), n = x->dim(1);
    auto out = zeros({n, m});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            out->data[static_cast<std::size_t>(j) * m + i] = x->data[static_cast<std::size_t>(i) * n + j];
    record([x, out, m, n]() {
        if (no_grad(out)) return;
        x->ensure_grad();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
                x->grad[static_cast<std::size_t>(i) * n + j] += out->grad[static_cast<std::size_t>(j) * m + i];
    });
    return out;
}

TensorPtr Tape::gather(TensorPtr x, std::shared_ptr<const std::vector<std::int64_t>> idx, Shape out_shape) {
    require(static_cast<std::int64_t>(idx->size()) == numel(out_shape),
            "gather: index count does not match output shape " + shape_str(out_shape));
    for (std::int64_t i : *idx)
        require(i >= 0 && i < x->size(), "gather: index out of range");
    auto out = zeros(std::move(out_shape));
    for (std::size_t i = 0; i < idx->size(); ++i) out->data[i] = x->data[static_cast<std::size_t>((*idx)[i])];
    record([x, out, idx]() {
        if (no_grad(out)) return;
        x->ensure_grad();
        for (std::size_t i = 0; i < idx->size(); ++i)
            x->grad[static_cast<std::size_t>((*idx)[i])] += out->grad[i];
    });
    return out;
}

TensorPtr Tape::avg_pool(TensorPtr x, int kernel, int stride) { return avg_pool(x, kernel, kernel, stride, stride); }

TensorPtr Tape::avg_pool(TensorPtr x, int kh, int kw, int sh, int sw) {
    require(x->rank() == 3, "avg_pool: input must be [C,H,W], got " + shape_str(x->shape));
    require(kh >= 1 && kw >= 1 && sh >= 1 && sw >= 1, "avg_pool: kernel and stride must be positive");
    const int c = x->dim(0), h = x->dim(1), w = x->dim(2);
    require(kh <= h && kw <= w, "avg_pool: kernel larger than input " + shape_str(x->shape));
    const int oh = (h - kh) / sh + 1, ow = (w - kw) / sw + 1;
    const double inv = 1.0 / (static_cast<double>(kh) * kw);
    auto out = zeros({c, oh, ow});
    for (int ci = 0; ci < c; ++ci) {
        const double* xc = x->data.data() + static_cast<std::size_t>(ci) * h * w;
        double* oc = out->data.data() + static_cast<std::size_t>(ci) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                double acc = 0.0;
                for (int dy = 0; dy < kh; ++dy) {
                    const double* row = xc + static_cast<std::size_t>(oy * sh + dy) * w + ox * sw;
                    for (int dx = 0; dx < kw; ++dx) acc += row[dx];
                }
                oc[static_cast<std::size_t>(oy) * ow + ox] = acc * inv;
            }
        }
    }
    record([x, out, c, h, w, oh, ow, kh, kw, sh, sw, inv]() {
        if (no_grad(out)) return;
        x->ensure_grad();
        for (int ci = 0; ci < c; ++ci) {
            double* xg = x->grad.data() + static_cast<std::size_t>(ci) * h * w;
            const double* og = out->grad.data() + static_cast<std::size_t>(ci) * oh * ow;
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    const double g = og[static_cast<std::size_t>(oy) * ow + ox] * inv;
                    for (int dy = 0; dy < kh; ++dy) {
                        double* row = xg + static_cast<std::size_t>(oy * sh + dy) * w + ox * sw;
                        for (int dx = 0; dx < kw; ++dx) row[dx] += g;
                    }
                }
            }
        }
    });
    return out;
}

TensorPtr Tape::global_avg_pool(TensorPtr x) {
    require(x->rank() == 3, "global_avg_pool: input must be [C,H,W], got " + shape_str(x->shape));
    const int c = x->dim(0);
    const std::int64_t hw = static_cast<std::int64_t>(x->dim(1)) * x->dim(2);
    const double inv = 1.0 / static_cast<double>(hw);
    auto out = zeros({c});
    for (int ci = 0; ci < c; ++ci) {
        double acc = 0.0;
        for (std::int64_t i = 0; i < hw; ++i) acc += x->data[ci * hw + i];
        out->data[ci] = acc * inv;
    }
    record([x, out, c, hw, inv]() {
        if (no_grad(out)) return;
        x->ensure_grad();
        for (int ci = 0; ci < c; ++ci) {
            const double g = out->grad[ci] * inv;
            for (std::int64_t i = 0; i < hw; ++i) x->grad[ci * hw + i] += g;
        }
    });
    return out;
}

TensorPtr Tape::dot_all(TensorPtr x, TensorPtr w) {
    check_same_shape("dot_all", *x, *w);
    double acc = 0.0;
    for (std::size_t i = 0; i < x->data.size(); ++i) acc += x->data[i] * w->data[i];
    auto out = scalar(acc);
    record([x, w, out]() {
        if (no_grad(out)) return;
        x->ensure_grad();
        w->ensure_grad();
        const double g = out->grad[0];
        for (std::size_t i = 0; i < x->data.size(); ++i) {
            x->grad[i] += g * w->data[i];
            w->grad[i] += g * x->data[i];
        }
    });
    return out;
}

TensorPtr Tape::custom(TensorPtr out, std::function<void()> backward) {
    record(std::move(backward));
    return out;
}

void Tape::backward(TensorPtr root) {
    require(root->size() == 1, "backward: root must be scalar, got " + shape_str(root->shape));
    root->ensure_grad();
    root->grad[0] = 1.0;
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
}

GradCheckReport grad_check(const std::string& name, const OpFn& fn, const std::vector<TensorPtr>& inputs,
                           double eps, const Tensor* weights, std::uint64_t weight_seed) {
    if (eps < 1e-7 || eps > 1e-3)
        throw std::invalid_argument("grad_check: epsilon " + std::to_string(eps) + " outside [1e-7, 1e-3]");

    // Probe the output shape, then fix the scalarization weights.
    TensorPtr w;
    {
        Tape probe;
        auto out = fn(probe, inputs);
        if (weights) {
            check_same_shape("grad_check weights", *out, *weights);
            w = tensor(weights->shape, weights->data);
        } else {
            Rng rng(weight_seed);
            w = rand_uniform(out->shape, rng, 0.5, 1.5);
        }
    }

    auto objective = [&](void) -> double {
        Tape t;
        auto out = fn(t, inputs);
        double acc = 0.0;
        for (std::size_t i = 0; i < out->data.size(); ++i) acc += out->data[i] * w->data[i];
        return acc;
    };

    // One reverse pass for the analytic gradients.
    for (const auto& in : inputs) {
        in->ensure_grad();
        in->zero_grad();
    }
    {
        Tape t;
        auto out = fn(t, inputs);
        auto s = t.dot_all(out, w);
        t.backward(s);
    }
    std::vector<std::vector<double>> analytic;
    analytic.reserve(inputs.size());
    for (const auto& in : inputs) analytic.push_back(in->grad);

    GradCheckReport report{name, 0.0, false};
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        auto& x = inputs[k]->data;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double saved = x[i];
            x[i] = saved + eps;
            const double fp = objective();
            x[i] = saved - eps;
            const double fm = objective();
            x[i] = saved;
            const double numeric = (fp - fm) / (2.0 * eps);
            const double a = analytic[k][i];
            const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
            report.max_rel_err = std::max(report.max_rel_err, rel);
        }
    }
    report.pass = report.max_rel_err < 1e-4;
    return report;
}

}  // namespace stfa
