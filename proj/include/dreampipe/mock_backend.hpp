#pragma once

#include "dreampipe/protocol.hpp"

namespace dreampipe {

inline constexpr const char* kMockModelId = "dreampipe-mock/1";

// Deterministic stand-in for a diffusion backend. Output depends only on the
// request; generate and upscale results tile horizontally (first and last
// columns are equal).
StylizeResponse mock_backend(const StylizeRequest& request);

// Keys cubic (a = -0.5) resampling by an integer factor; columns wrap.
Image8 bicubic_upscale(const Image8& image, int factor);

// Mean |column 0 - column W-1| over rows and channels, 8-bit units.
double wrap_difference(const Image8& pano);

}  // namespace dreampipe
