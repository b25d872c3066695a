#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "votseg/image.hpp"
#include "votseg/template.hpp"

namespace votseg {

/// One candidate detection.
struct Proposal {
    Box box;
    BitMask mask;
    double confidence = 0.0;
};

/// Weights of the box and mask IOU terms; must sum to 1.
struct MatchWeights {
    double alpha = 0.5;
    double beta = 0.5;
};

inline void check_weights(const MatchWeights& w) {
    if (w.alpha < 0 || w.beta < 0 || std::abs(w.alpha + w.beta - 1.0) > 1e-9)
        throw std::invalid_argument("MatchWeights: alpha and beta must be nonnegative and sum to 1");
}

/// Weighted box+mask IOU of a proposal against the template.
inline double score_iou(const TargetTemplate& t, const Proposal& p, const MatchWeights& w) {
    check_weights(w);
    double s = 0.0;
    if (w.alpha != 0.0) s += w.alpha * box_iou(t.box, p.box);
    if (w.beta != 0.0) s += w.beta * mask_iou(t.mask, p.mask);
    return s;
}

/// Normalized 8x8x8 joint RGB histogram of a patch.
class Embedding {
public:
    static constexpr int kBins = 8;
    static constexpr int kLength = kBins * kBins * kBins;

    explicit Embedding(const Image& patch) : values_(kLength, 0.0) {
        if (patch.width <= 0 || patch.height <= 0 || patch.pixels.empty())
            throw std::invalid_argument("Embedding: empty patch");
        const std::size_t n = static_cast<std::size_t>(patch.width) * patch.height;
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint8_t* px = patch.pixels.data() + i * 3;
            const int bin = ((px[0] >> 5) * kBins + (px[1] >> 5)) * kBins + (px[2] >> 5);
            values_[bin] += 1.0;
        }
        for (double& v : values_) v /= static_cast<double>(n);
    }

    std::span<const double> values() const { return values_; }

    double l2_distance(const Embedding& o) const {
        double s = 0.0;
        for (int i = 0; i < kLength; ++i) {
            const double d = values_[i] - o.values_[i];
            s += d * d;
        }
        return std::sqrt(s);
    }

private:
    std::vector<double> values_;
};

inline Embedding embed(const Image& patch) { return Embedding(patch); }

/// Appearance similarity of box crops, 1 / (1 + L2 distance of embeddings).
/// Strictly decreasing in the distance, so it preserves the argmax. The
/// proposal crop is taken from the frame the proposal was detected on.
inline double score_appearance(const TargetTemplate& t, const Proposal& p, const Image& proposal_frame) {
    check_template(t, "score_appearance");
    require_valid(p.box, "score_appearance");
    const Box clipped = intersect_boxes(p.box, Box{0, 0, proposal_frame.width, proposal_frame.height});
    require_valid(clipped, "score_appearance: proposal crop");
    const Embedding et(crop(*t.frame, t.box));
    const Embedding ep(crop(proposal_frame, clipped));
    return 1.0 / (1.0 + et.l2_distance(ep));
}

/// Index of the highest score, ties broken by lowest index; empty input
/// yields no index (the pipeline treats that as a forced Keep).
inline std::optional<std::size_t> select_best(std::span<const double> scores) {
    if (scores.empty()) return std::nullopt;
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i)
        if (scores[i] > scores[best]) best = i;
    return best;
}

}  // namespace votseg
