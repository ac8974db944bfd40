#pragma once

#include <vector>

#include "stfa/image.hpp"

namespace stfa {

// Two consecutive frames, equal extents, values clamped to [0,1].
struct FramePair {
    Image prev;
    Image next;

    FramePair(Image p, Image n);
};

struct FlowField {
    int h = 0;
    int w = 0;
    std::vector<double> u;  // horizontal, pixels/frame
    std::vector<double> v;  // vertical

    FlowField() = default;
    FlowField(int h_, int w_);
};

struct Derivatives {
    int h = 0;
    int w = 0;
    std::vector<double> ix, iy, it;
};

// |next - prev| plus flow magnitude as separate channels; both >= 0.
struct MotionResidual {
    int h = 0;
    int w = 0;
    std::vector<double> diff;
    std::vector<double> mag;
};

// Spatial gradients averaged over both frames, central differences inside,
// one-sided at the edges; it = next - prev.
Derivatives image_derivatives(const FramePair& pair);

// Jacobi iterations of the Horn-Schunck update from zero-initialized flow.
// Neighbor averages reflect at borders, so a static pair stays exactly zero.
FlowField horn_schunck(const FramePair& pair, double alpha = 1.0, int iters = 200);

// Global energy: sum of squared flow-constraint residuals plus alpha^2 times
// squared forward-difference gradients of u and v.
double flow_energy(const Derivatives& d, const FlowField& flow, double alpha);

MotionResidual motion_residual(const FramePair& pair, const FlowField& flow);

// Mean squared deviation of flow vectors from their 4-neighbor averages.
double incoherence_score(const FlowField& flow);

enum class SliceAxis { Row, Column };

// Stacks the chosen row (or column) of every frame into a frames x extent image.
Image extract_slice(const std::vector<Image>& frames, SliceAxis axis, int index);

// Mean absolute difference between consecutive rows; 0 for a single row.
double slice_roughness(const Image& slice);

}  // namespace stfa
