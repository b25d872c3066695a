#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "votseg/image.hpp"
#include "votseg/template.hpp"

namespace votseg {

/// Concatenated template/prediction feature vector fed to the agent.
using StateVec = std::vector<double>;

constexpr int kGeometryFeatures = 6;

inline int feature_dim(int grid) { return grid * grid + kGeometryFeatures; }

/// Mean-pooled luminance grid over the whole view plus box geometry features,
/// everything scaled to [0, 1]. Luminance is (R+G+B)/(3*255); grid cell
/// boundaries are rounded to integers.
inline void extract(const Image& view, const Box& region_box, int grid, std::span<double> out) {
    const int w = view.width;
    const int h = view.height;
    std::vector<int> xs(grid + 1), ys(grid + 1);
    for (int i = 0; i <= grid; ++i) {
        xs[i] = static_cast<int>(std::lround(static_cast<double>(i) * w / grid));
        ys[i] = static_cast<int>(std::lround(static_cast<double>(i) * h / grid));
    }
    for (int gy = 0; gy < grid; ++gy) {
        for (int gx = 0; gx < grid; ++gx) {
            std::int64_t sum = 0;
            std::int64_t count = 0;
            for (int y = ys[gy]; y < ys[gy + 1]; ++y) {
                const std::uint8_t* px = view.at(xs[gx], y);
                for (int x = xs[gx]; x < xs[gx + 1]; ++x, px += 3)
                    sum += px[0] + px[1] + px[2];
                count += xs[gx + 1] - xs[gx];
            }
            out[gy * grid + gx] = count == 0 ? 0.0 : static_cast<double>(sum) / (765.0 * count);
        }
    }
    double* geo = out.data() + grid * grid;
    geo[0] = region_box.center_x() / w;
    geo[1] = region_box.center_y() / h;
    geo[2] = static_cast<double>(region_box.width()) / w;
    geo[3] = static_cast<double>(region_box.height()) / h;
    geo[4] = static_cast<double>(region_box.area()) / (static_cast<double>(w) * h);
    const double aspect = static_cast<double>(region_box.width()) / region_box.height();
    geo[5] = std::clamp(aspect, 0.0, 4.0) / 4.0;
}

inline std::vector<double> extract(const Image& view, const Box& region_box, int grid = 16) {
    std::vector<double> out(feature_dim(grid));
    extract(view, region_box, grid, out);
    return out;
}

/// Scratch buffers reused across state builds; one per tracker loop.
struct StateScratch {
    Image template_view;
    Image prediction_view;
};

/// s_t = [extract(S_T, T_box), extract(S_P, P_box)], template stream first.
inline void build_state(const TargetTemplate& t, const PredictedResult& p, int grid, StateScratch& scratch,
                        StateVec& out) {
    const int d = feature_dim(grid);
    out.resize(2 * d);
    compose_template_view(t, scratch.template_view);
    compose_prediction_view(p, scratch.prediction_view);
    extract(scratch.template_view, t.box, grid, std::span<double>(out.data(), d));
    extract(scratch.prediction_view, p.box, grid, std::span<double>(out.data() + d, d));
}

inline StateVec build_state(const TargetTemplate& t, const PredictedResult& p, int grid, StateScratch& scratch) {
    StateVec out;
    build_state(t, p, grid, scratch, out);
    return out;
}

inline StateVec build_state(const TargetTemplate& t, const PredictedResult& p, int grid = 16) {
    StateScratch scratch;
    return build_state(t, p, grid, scratch);
}

}  // namespace votseg
