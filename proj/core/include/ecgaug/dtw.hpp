#pragma once

#include <span>

namespace ecgaug {

// Classic dynamic-time-warping distance: local cost |a_i - b_j|, steps
// {(1,0),(0,1),(1,1)}, full window, no path normalization. Symmetric in its
// arguments. Throws on empty inputs.
//
// The convention is deliberately fixed: screening thresholds are only
// meaningful relative to one cost definition.
double dtw(std::span<const double> a, std::span<const double> b);

} // namespace ecgaug
