#pragma once

#include <cstring>
#include <stdexcept>
#include <utility>

#include "votseg/geometry.hpp"
#include "votseg/image.hpp"

namespace votseg {

/// The two agent actions: replace the template with the prediction, or keep
/// the template unchanged.
enum class Action { Update, Keep };

inline const char* action_name(Action a) { return a == Action::Update ? "update" : "keep"; }

/// The tracker's stored belief about one object: the last accepted frame,
/// its bounding box and its segmentation mask.
struct TargetTemplate {
    ImagePtr frame;
    Box box;
    BitMask mask;
};

/// One candidate result to be judged: the current frame, the selected
/// proposal's box/mask and its matching score.
struct PredictedResult {
    ImagePtr frame;
    Box box;
    BitMask mask;
    double score = 0.0;
};

inline void check_template(const TargetTemplate& t, const char* what) {
    if (!t.frame) throw std::invalid_argument(std::string(what) + ": template has no frame");
    if (t.mask.width() != t.frame->width || t.mask.height() != t.frame->height)
        throw std::invalid_argument(std::string(what) + ": mask/frame dimension mismatch");
    require_valid(t.box, what);
    if (!box_within(t.box, t.frame->width, t.frame->height))
        throw std::invalid_argument(std::string(what) + ": box outside frame");
}

/// First-frame bootstrap: only a box is given, so the mask starts as the
/// filled box interior.
inline TargetTemplate init_template(ImagePtr frame, const Box& box) {
    if (!frame) throw std::invalid_argument("init_template: null frame");
    require_valid(box, "init_template");
    if (!box_within(box, frame->width, frame->height))
        throw std::invalid_argument("init_template: box outside frame");
    BitMask mask = BitMask::filled_box(frame->width, frame->height, box);
    return TargetTemplate{std::move(frame), box, std::move(mask)};
}

/// Update replaces the template with the prediction bit-exactly; Keep returns
/// the template unchanged.
inline TargetTemplate apply_decision(const TargetTemplate& t, const PredictedResult& p, Action a) {
    check_template(t, "apply_decision");
    if (!p.frame || !p.frame->same_dims(*t.frame))
        throw std::invalid_argument("apply_decision: prediction/template dimension mismatch");
    if (a == Action::Keep) return t;
    return TargetTemplate{p.frame, p.box, p.mask};
}

/// S_T: the template frame with everything outside the template box blackened.
inline void compose_template_view(const TargetTemplate& t, Image& out) {
    check_template(t, "compose_template_view");
    const Image& src = *t.frame;
    if (!out.same_dims(src)) out = Image(src.width, src.height);
    std::memset(out.pixels.data(), 0, out.pixels.size());
    const std::size_t row_bytes = static_cast<std::size_t>(t.box.width()) * 3;
    for (int y = t.box.y0; y < t.box.y1; ++y) std::memcpy(out.at(t.box.x0, y), src.at(t.box.x0, y), row_bytes);
}

inline Image compose_template_view(const TargetTemplate& t) {
    Image out;
    compose_template_view(t, out);
    return out;
}

/// S_P: the prediction frame with everything outside the predicted mask
/// blackened.
inline void compose_prediction_view(const PredictedResult& p, Image& out) {
    if (!p.frame) throw std::invalid_argument("compose_prediction_view: null frame");
    const Image& src = *p.frame;
    if (p.mask.width() != src.width || p.mask.height() != src.height)
        throw std::invalid_argument("compose_prediction_view: mask/frame dimension mismatch");
    if (!out.same_dims(src)) out = Image(src.width, src.height);
    std::memset(out.pixels.data(), 0, out.pixels.size());
    for (int y = 0; y < src.height; ++y) {
        for (int x = 0; x < src.width; ++x) {
            if (!p.mask.get(x, y)) continue;
            const std::uint8_t* s = src.at(x, y);
            std::uint8_t* d = out.at(x, y);
            d[0] = s[0];
            d[1] = s[1];
            d[2] = s[2];
        }
    }
}

inline Image compose_prediction_view(const PredictedResult& p) {
    Image out;
    compose_prediction_view(p, out);
    return out;
}

}  // namespace votseg
