#pragma once

#include "deocc/image.hpp"

namespace deocc {

/// Default erosion applied to the render mask and the background mask.
inline constexpr int kDefaultEdgeErosion = 3;

/// M_o = M_m - M_m * M_f, i.e. render-mask pixels the visible face does not cover.
MaskF occlusion_mask(const MaskF& render_mask, const MaskF& face_mask);

/// M = M_m * M_f, the visible part of the rendered face.
MaskF supervision_mask(const MaskF& render_mask, const MaskF& face_mask);

/// erode(1 - M_m, radius).
MaskF background_mask(const MaskF& render_mask, int erosion_radius = kDefaultEdgeErosion);

/// Sum(M_m * M_f) / Sum(M_m). Zero for an empty render mask.
double overlap_rate(const MaskF& render_mask, const MaskF& face_mask);

MaskF complement(const MaskF& mask);

}  // namespace deocc
