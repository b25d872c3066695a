#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "votseg/datasets.hpp"
#include "votseg/geometry.hpp"

namespace votseg {

/// Region similarity J: intersection over union of the two supports.
inline double region_similarity(const BitMask& predicted, const BitMask& truth) {
    return mask_iou(predicted, truth);
}

/// Foreground pixels 4-adjacent to background or to the image border.
inline BitMask boundary_mask(const BitMask& m) {
    BitMask out(m.width(), m.height());
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            if (!m.get(x, y)) continue;
            const bool edge = x == 0 || y == 0 || x == m.width() - 1 || y == m.height() - 1 ||
                              !m.get(x - 1, y) || !m.get(x + 1, y) || !m.get(x, y - 1) || !m.get(x, y + 1);
            if (edge) out.set(x, y, true);
        }
    }
    return out;
}

inline int boundary_tolerance(int width, int height) {
    const double diag = std::sqrt(static_cast<double>(width) * width + static_cast<double>(height) * height);
    return std::max(1, static_cast<int>(std::ceil(0.008 * diag)));
}

namespace detail {

/// All boundary pixels grown by a disk of the given radius.
inline BitMask grow_disk(const BitMask& m, int radius) {
    std::vector<std::pair<int, int>> disk;
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx)
            if (dx * dx + dy * dy <= radius * radius) disk.emplace_back(dx, dy);
    BitMask out(m.width(), m.height());
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x) {
            if (!m.get(x, y)) continue;
            for (const auto& [dx, dy] : disk) {
                const int nx = x + dx;
                const int ny = y + dy;
                if (nx >= 0 && ny >= 0 && nx < m.width() && ny < m.height()) out.set(nx, ny, true);
            }
        }
    return out;
}

inline std::int64_t count_inside(const BitMask& pts, const BitMask& region) {
    std::int64_t n = 0;
    for (int y = 0; y < pts.height(); ++y)
        for (int x = 0; x < pts.width(); ++x)
            if (pts.get(x, y) && region.get(x, y)) ++n;
    return n;
}

}  // namespace detail

/// Contour accuracy F: harmonic mean of boundary precision and recall, where
/// a boundary pixel counts as matched if the other mask has a boundary pixel
/// within the tolerance radius.
inline double contour_accuracy(const BitMask& predicted, const BitMask& truth) {
    if (!predicted.same_dims(truth)) throw std::invalid_argument("contour_accuracy: dimension mismatch");
    const BitMask pb = boundary_mask(predicted);
    const BitMask tb = boundary_mask(truth);
    const std::int64_t np = pb.count();
    const std::int64_t nt = tb.count();
    if (np == 0 && nt == 0) return 1.0;
    if (np == 0 || nt == 0) return 0.0;
    const int tol = boundary_tolerance(predicted.width(), predicted.height());
    const double precision = static_cast<double>(detail::count_inside(pb, detail::grow_disk(tb, tol))) / np;
    const double recall = static_cast<double>(detail::count_inside(tb, detail::grow_disk(pb, tol))) / nt;
    if (precision + recall == 0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

// ---------------------------------------------------------------------------
// Long-term score. The tracker reports a confidence each frame; sweeping a
// report threshold trades precision (mean overlap over reported frames)
// against recall (summed overlap over ground-truth frames). The score is the
// best harmonic mean over all thresholds.

struct LongtermFrame {
    bool has_gt = false;
    bool has_prediction = false;
    double confidence = 0;
    double overlap = 0;  // overlap with ground truth; 0 when either is missing
};

inline double longterm_f_score(std::span<const LongtermFrame> frames) {
    std::vector<double> thresholds;
    std::int64_t gt_frames = 0;
    for (const auto& f : frames) {
        if (f.has_prediction) thresholds.push_back(f.confidence);
        if (f.has_gt) ++gt_frames;
    }
    if (thresholds.empty() || gt_frames == 0) return 0.0;
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    double best = 0.0;
    for (const double tau : thresholds) {
        double overlap_sum = 0;
        std::int64_t reported = 0;
        for (const auto& f : frames) {
            if (!f.has_prediction || f.confidence < tau) continue;
            ++reported;
            overlap_sum += f.overlap;
        }
        if (reported == 0) continue;
        const double precision = overlap_sum / reported;
        const double recall = overlap_sum / gt_frames;
        if (precision + recall == 0) continue;
        best = std::max(best, 2.0 * precision * recall / (precision + recall));
    }
    return best;
}

// ---------------------------------------------------------------------------
// Per-object summary over one tracked sequence.

struct MetricsReport {
    double mean_j = 0;
    double mean_f = 0;
    double mean_jf = 0;
    double longterm_f = 0;
    int frames_evaluated = 0;
};

/// Scores frames 1..T-1 (frame 0 is the given template). Frames whose ground
/// truth is absent are skipped for J and F but still enter the long-term
/// sweep, where reporting on them costs precision.
inline MetricsReport evaluate_object_track(const ObjectGt& gt, const std::vector<std::optional<BitMask>>& outputs,
                                           const std::vector<double>& confidences) {
    if (gt.masks.size() != outputs.size() || outputs.size() != confidences.size())
        throw std::invalid_argument("evaluate_object_track: length mismatch");
    MetricsReport r;
    std::vector<LongtermFrame> lt;
    double j_sum = 0;
    double f_sum = 0;
    for (std::size_t t = 1; t < outputs.size(); ++t) {
        LongtermFrame lf;
        lf.has_gt = gt.masks[t].has_value();
        lf.has_prediction = outputs[t].has_value();
        if (lf.has_prediction) lf.confidence = confidences[t];
        if (lf.has_gt && lf.has_prediction) lf.overlap = region_similarity(*outputs[t], *gt.masks[t]);
        lt.push_back(lf);
        if (!lf.has_gt) continue;
        ++r.frames_evaluated;
        if (lf.has_prediction) {
            j_sum += lf.overlap;
            f_sum += contour_accuracy(*outputs[t], *gt.masks[t]);
        }
    }
    if (r.frames_evaluated > 0) {
        r.mean_j = j_sum / r.frames_evaluated;
        r.mean_f = f_sum / r.frames_evaluated;
        r.mean_jf = 0.5 * (r.mean_j + r.mean_f);
    }
    r.longterm_f = longterm_f_score(lt);
    return r;
}

inline std::string format_metrics_report(const MetricsReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "mean_j %.17g\nmean_f %.17g\nmean_jf %.17g\nlongterm_f %.17g\nframes_evaluated %d\n", r.mean_j,
                  r.mean_f, r.mean_jf, r.longterm_f, r.frames_evaluated);
    return buf;
}

}  // namespace votseg
