#include "stfa/flow.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace stfa {

namespace {

// Reflect-101 for single-step neighbors: -1 -> 1, n -> n-2.
inline int refl(int i, int n) {
    if (i < 0) return -i;
    if (i >= n) return 2 * n - 2 - i;
    return i;
}

// One-frame spatial differences, central inside, one-sided at the edges.
void spatial_diff(const Image& img, std::vector<double>& dx, std::vector<double>& dy) {
    const int h = img.h, w = img.w;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            if (x == 0)
                dx[i] += img.at(y, 1) - img.at(y, 0);
            else if (x == w - 1)
                dx[i] += img.at(y, w - 1) - img.at(y, w - 2);
            else
                dx[i] += 0.5 * (img.at(y, x + 1) - img.at(y, x - 1));
            if (y == 0)
                dy[i] += img.at(1, x) - img.at(0, x);
            else if (y == h - 1)
                dy[i] += img.at(h - 1, x) - img.at(h - 2, x);
            else
                dy[i] += 0.5 * (img.at(y + 1, x) - img.at(y - 1, x));
        }
    }
}

void neighbor_average(const std::vector<double>& f, int h, int w, std::vector<double>& out) {
    for (int y = 0; y < h; ++y) {
        const int yu = refl(y - 1, h), yd = refl(y + 1, h);
        for (int x = 0; x < w; ++x) {
            const int xl = refl(x - 1, w), xr = refl(x + 1, w);
            out[static_cast<std::size_t>(y) * w + x] =
                0.25 * (f[static_cast<std::size_t>(yu) * w + x] + f[static_cast<std::size_t>(yd) * w + x] +
                        f[static_cast<std::size_t>(y) * w + xl] + f[static_cast<std::size_t>(y) * w + xr]);
        }
    }
}

}  // namespace

FramePair::FramePair(Image p, Image n) : prev(std::move(p)), next(std::move(n)) {
    if (prev.h != next.h || prev.w != next.w)
        throw std::invalid_argument("frame pair extents disagree: " + std::to_string(prev.h) + "x" +
                                    std::to_string(prev.w) + " vs " + std::to_string(next.h) + "x" +
                                    std::to_string(next.w));
    if (prev.h < 2 || prev.w < 2)
        throw std::invalid_argument("frame pair needs extents >= 2, got " + std::to_string(prev.h) + "x" +
                                    std::to_string(prev.w));
    for (double& v : prev.px) v = std::clamp(v, 0.0, 1.0);
    for (double& v : next.px) v = std::clamp(v, 0.0, 1.0);
}

FlowField::FlowField(int h_, int w_) : h(h_), w(w_) {
    if (h_ <= 0 || w_ <= 0) throw std::invalid_argument("flow field extents must be positive");
    u.assign(static_cast<std::size_t>(h_) * w_, 0.0);
    v.assign(static_cast<std::size_t>(h_) * w_, 0.0);
}

Derivatives image_derivatives(const FramePair& pair) {
    const int h = pair.prev.h, w = pair.prev.w;
    Derivatives d;
    d.h = h;
    d.w = w;
    const std::size_t n = static_cast<std::size_t>(h) * w;
    d.ix.assign(n, 0.0);
    d.iy.assign(n, 0.0);
    d.it.resize(n);
    spatial_diff(pair.prev, d.ix, d.iy);
    spatial_diff(pair.next, d.ix, d.iy);
    for (std::size_t i = 0; i < n; ++i) {
        d.ix[i] *= 0.5;
        d.iy[i] *= 0.5;
        d.it[i] = pair.next.px[i] - pair.prev.px[i];
    }
    return d;
}

FlowField horn_schunck(const FramePair& pair, double alpha, int iters) {
    if (alpha <= 0.0) throw std::invalid_argument("horn_schunck: alpha must be positive");
    if (iters < 1) throw std::invalid_argument("horn_schunck: iters must be >= 1");
    const auto d = image_derivatives(pair);
    const int h = d.h, w = d.w;
    const std::size_t n = d.ix.size();
    const double a2 = alpha * alpha;

    FlowField flow(h, w);
    std::vector<double> ubar(n), vbar(n);
    for (int it = 0; it < iters; ++it) {
        neighbor_average(flow.u, h, w, ubar);
        neighbor_average(flow.v, h, w, vbar);
        for (std::size_t i = 0; i < n; ++i) {
            const double ix = d.ix[i], iy = d.iy[i];
            const double t = (ix * ubar[i] + iy * vbar[i] + d.it[i]) / (a2 + ix * ix + iy * iy);
            flow.u[i] = ubar[i] - ix * t;
            flow.v[i] = vbar[i] - iy * t;
        }
    }
    return flow;
}

double flow_energy(const Derivatives& d, const FlowField& flow, double alpha) {
    if (d.h != flow.h || d.w != flow.w)
        throw std::invalid_argument("flow_energy: extents disagree");
    const int h = d.h, w = d.w;
    double data = 0.0, smooth = 0.0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            const double r = d.ix[i] * flow.u[i] + d.iy[i] * flow.v[i] + d.it[i];
            data += r * r;
            if (x + 1 < w) {
                const double du = flow.u[i + 1] - flow.u[i];
                const double dv = flow.v[i + 1] - flow.v[i];
                smooth += du * du + dv * dv;
            }
            if (y + 1 < h) {
                const double du = flow.u[i + w] - flow.u[i];
                const double dv = flow.v[i + w] - flow.v[i];
                smooth += du * du + dv * dv;
            }
        }
    }
    return data + alpha * alpha * smooth;
}

MotionResidual motion_residual(const FramePair& pair, const FlowField& flow) {
    if (pair.prev.h != flow.h || pair.prev.w != flow.w)
        throw std::invalid_argument("motion_residual: frame extents " + std::to_string(pair.prev.h) + "x" +
                                    std::to_string(pair.prev.w) + " vs flow " + std::to_string(flow.h) + "x" +
                                    std::to_string(flow.w));
    MotionResidual r;
    r.h = flow.h;
    r.w = flow.w;
    const std::size_t n = flow.u.size();
    r.diff.resize(n);
    r.mag.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        r.diff[i] = std::abs(pair.next.px[i] - pair.prev.px[i]);
        r.mag[i] = std::hypot(flow.u[i], flow.v[i]);
    }
    return r;
}

double incoherence_score(const FlowField& flow) {
    if (flow.h < 2 || flow.w < 2)
        throw std::invalid_argument("incoherence_score: needs extents >= 2");
    const int h = flow.h, w = flow.w;
    const std::size_t n = flow.u.size();
    std::vector<double> ubar(n), vbar(n);
    neighbor_average(flow.u, h, w, ubar);
    neighbor_average(flow.v, h, w, vbar);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double du = flow.u[i] - ubar[i];
        const double dv = flow.v[i] - vbar[i];
        acc += du * du + dv * dv;
    }
    return acc / static_cast<double>(n);
}

Image extract_slice(const std::vector<Image>& frames, SliceAxis axis, int index) {
    if (frames.empty()) throw std::invalid_argument("extract_slice: empty clip");
    const int h = frames[0].h, w = frames[0].w;
    for (const auto& f : frames)
        if (f.h != h || f.w != w) throw std::invalid_argument("extract_slice: frame extents disagree");
    const int extent = axis == SliceAxis::Row ? w : h;
    const int limit = axis == SliceAxis::Row ? h : w;
    if (index < 0 || index >= limit)
        throw std::invalid_argument("extract_slice: index " + std::to_string(index) + " out of range [0," +
                                    std::to_string(limit) + ")");
    Image out(static_cast<int>(frames.size()), extent);
    for (std::size_t f = 0; f < frames.size(); ++f) {
        for (int i = 0; i < extent; ++i)
            out.at(static_cast<int>(f), i) =
                axis == SliceAxis::Row ? frames[f].at(index, i) : frames[f].at(i, index);
    }
    return out;
}

double slice_roughness(const Image& slice) {
    if (slice.h < 2) return 0.0;
    double acc = 0.0;
    for (int y = 0; y + 1 < slice.h; ++y)
        for (int x = 0; x < slice.w; ++x) acc += std::abs(slice.at(y + 1, x) - slice.at(y, x));
    return acc / (static_cast<double>(slice.h - 1) * slice.w);
}

}  // namespace stfa
