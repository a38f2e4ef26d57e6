#include "deocc/maskops.hpp"

namespace deocc {
namespace {

void check_pair(const MaskF& render_mask, const MaskF& face_mask, const char* what) {
    require_same_shape(render_mask, face_mask, what);
    require_binary(render_mask, what);
    require_binary(face_mask, what);
}

}  // namespace

MaskF occlusion_mask(const MaskF& render_mask, const MaskF& face_mask) {
    check_pair(render_mask, face_mask, "occlusion_mask");
    MaskF out(render_mask.height(), render_mask.width());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = render_mask[i] - render_mask[i] * face_mask[i];
    }
    return out;
}

MaskF supervision_mask(const MaskF& render_mask, const MaskF& face_mask) {
    check_pair(render_mask, face_mask, "supervision_mask");
    MaskF out(render_mask.height(), render_mask.width());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = render_mask[i] * face_mask[i];
    }
    return out;
}

MaskF complement(const MaskF& mask) {
    MaskF out(mask.height(), mask.width());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = 1.0 - mask[i];
    }
    return out;
}

MaskF background_mask(const MaskF& render_mask, int erosion_radius) {
    require_binary(render_mask, "background_mask");
    return erode(complement(render_mask), erosion_radius);
}

double overlap_rate(const MaskF& render_mask, const MaskF& face_mask) {
    check_pair(render_mask, face_mask, "overlap_rate");
    const double total = render_mask.sum();
    if (total == 0.0) {
        return 0.0;
    }
    return supervision_mask(render_mask, face_mask).sum() / total;
}

}  // namespace deocc
