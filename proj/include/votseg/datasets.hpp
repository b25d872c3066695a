#pragma once

#include <array>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "votseg/geometry.hpp"
#include "votseg/image.hpp"
#include "votseg/png_io.hpp"
#include "votseg/rng.hpp"

namespace votseg {

/// Ground-truth mask track for one object; a frame without an entry models
/// target absence.
struct ObjectGt {
    std::vector<std::optional<BitMask>> masks;
};

struct SequenceData {
    std::string name;
    std::vector<ImagePtr> frames;
    std::vector<ObjectGt> objects;   // object k is label k+1 in mask files
    std::vector<Box> first_boxes;    // tight boxes of first-frame ground truth

    int frame_count() const { return static_cast<int>(frames.size()); }
    int object_count() const { return static_cast<int>(objects.size()); }
};

// ---------------------------------------------------------------------------
// Synthetic sequences

enum class ShapeKind { Rectangle, Ellipse };

struct Waypoint {
    int frame;
    double x;
    double y;
};

/// Piecewise-linear interpolation over waypoints, clamped at both ends.
inline std::pair<double, double> interp_waypoints(const std::vector<Waypoint>& pts, int frame) {
    if (pts.empty()) throw std::invalid_argument("interp_waypoints: no waypoints");
    if (frame <= pts.front().frame) return {pts.front().x, pts.front().y};
    if (frame >= pts.back().frame) return {pts.back().x, pts.back().y};
    for (std::size_t i = 1; i < pts.size(); ++i) {
        if (frame > pts[i].frame) continue;
        const auto& a = pts[i - 1];
        const auto& b = pts[i];
        const double t = static_cast<double>(frame - a.frame) / (b.frame - a.frame);
        return {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
    }
    return {pts.back().x, pts.back().y};
}

struct SynthObject {
    ShapeKind shape = ShapeKind::Ellipse;
    double rx = 24;
    double ry = 18;
    std::array<std::uint8_t, 3> color{220, 210, 200};
    std::vector<Waypoint> waypoints;                 // center positions
    std::vector<std::pair<int, int>> absent;         // [begin, end) intervals
};

/// A lookalike rendered into the frames but excluded from ground truth. Its
/// support is the source object's support translated by the offset track, so
/// a scripted detector can reproduce it exactly from the ground truth.
struct SynthDistractor {
    int source = 0;
    double color_scale = 0.45;
    std::vector<Waypoint> offsets;                   // center offset from source
};

struct SynthOccluder {
    double rx = 10;
    double ry = 40;
    std::array<std::uint8_t, 3> color{30, 32, 38};
    std::vector<Waypoint> waypoints;
};

struct SynthConfig {
    std::string name = "synthetic";
    int width = 256;
    int height = 256;
    int frames = 40;
    std::array<std::uint8_t, 3> background{30, 32, 38};
    int noise_amplitude = 6;
    std::vector<SynthObject> objects;
    std::vector<SynthDistractor> distractors;
    std::vector<SynthOccluder> occluders;
    std::uint64_t seed = 0;
};

namespace detail {

inline BitMask render_support(ShapeKind shape, double cx, double cy, double rx, double ry, int w, int h) {
    BitMask m(w, h);
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - rx - 1)));
    const int x1 = std::min(w, static_cast<int>(std::ceil(cx + rx + 1)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - ry - 1)));
    const int y1 = std::min(h, static_cast<int>(std::ceil(cy + ry + 1)));
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            const double dx = (x + 0.5 - cx) / rx;
            const double dy = (y + 0.5 - cy) / ry;
            const bool inside = shape == ShapeKind::Ellipse ? dx * dx + dy * dy <= 1.0
                                                            : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
            if (inside) m.set(x, y, true);
        }
    }
    return m;
}

inline void paint(Image& img, const BitMask& support, std::array<std::uint8_t, 3> color) {
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            if (support.get(x, y)) {
                std::uint8_t* px = img.at(x, y);
                px[0] = color[0];
                px[1] = color[1];
                px[2] = color[2];
            }
}

inline std::array<std::uint8_t, 3> scale_color(std::array<std::uint8_t, 3> c, double s) {
    return {static_cast<std::uint8_t>(std::clamp(c[0] * s, 0.0, 255.0)),
            static_cast<std::uint8_t>(std::clamp(c[1] * s, 0.0, 255.0)),
            static_cast<std::uint8_t>(std::clamp(c[2] * s, 0.0, 255.0))};
}

inline bool in_interval(const std::vector<std::pair<int, int>>& intervals, int frame) {
    for (const auto& [b, e] : intervals)
        if (frame >= b && frame < e) return true;
    return false;
}

}  // namespace detail

inline void validate_synth_config(const SynthConfig& cfg) {
    if (cfg.width < 16 || cfg.height < 16) throw std::invalid_argument("SynthConfig: frame size too small");
    if (cfg.frames < 1) throw std::invalid_argument("SynthConfig: need at least one frame");
    if (cfg.objects.empty()) throw std::invalid_argument("SynthConfig: need at least one object");
    for (std::size_t k = 0; k < cfg.objects.size(); ++k) {
        const auto& o = cfg.objects[k];
        if (o.rx <= 0 || o.ry <= 0) throw std::invalid_argument("SynthConfig: nonpositive radius");
        if (o.waypoints.empty()) throw std::invalid_argument("SynthConfig: object without waypoints");
        for (const auto& wp : o.waypoints)
            if (wp.x < 0 || wp.x >= cfg.width || wp.y < 0 || wp.y >= cfg.height)
                throw std::invalid_argument("SynthConfig: waypoint outside frame");
        for (const auto& [b, e] : o.absent) {
            if (b < 0 || e > cfg.frames || b >= e)
                throw std::invalid_argument("SynthConfig: absence interval outside sequence");
            if (b == 0) throw std::invalid_argument("SynthConfig: object " + std::to_string(k) +
                                                    " absent in first frame");
        }
    }
    for (const auto& d : cfg.distractors)
        if (d.source < 0 || d.source >= static_cast<int>(cfg.objects.size()))
            throw std::invalid_argument("SynthConfig: distractor source out of range");
}

/// Renders the scene deterministically. Paint order is distractors, then
/// objects in index order, then occluders; an object's ground truth is the
/// set of pixels where it ends up visible.
inline SequenceData generate_synthetic(const SynthConfig& cfg) {
    validate_synth_config(cfg);
    SequenceData seq;
    seq.name = cfg.name;
    seq.objects.resize(cfg.objects.size());
    for (auto& o : seq.objects) o.masks.resize(cfg.frames);

    for (int t = 0; t < cfg.frames; ++t) {
        auto img = std::make_shared<Image>(cfg.width, cfg.height);
        img->fill(cfg.background[0], cfg.background[1], cfg.background[2]);

        std::vector<std::optional<BitMask>> supports(cfg.objects.size());
        for (std::size_t k = 0; k < cfg.objects.size(); ++k) {
            const auto& o = cfg.objects[k];
            if (detail::in_interval(o.absent, t)) continue;
            const auto [cx, cy] = interp_waypoints(o.waypoints, t);
            BitMask s = detail::render_support(o.shape, cx, cy, o.rx, o.ry, cfg.width, cfg.height);
            if (!s.empty()) supports[k] = std::move(s);
        }

        for (const auto& d : cfg.distractors) {
            if (!supports[d.source]) continue;
            const auto [ox, oy] = interp_waypoints(d.offsets, t);
            const BitMask s = translate_mask(*supports[d.source], static_cast<int>(std::lround(ox)),
                                             static_cast<int>(std::lround(oy)));
            detail::paint(*img, s, detail::scale_color(cfg.objects[d.source].color, d.color_scale));
        }

        for (std::size_t k = 0; k < cfg.objects.size(); ++k)
            if (supports[k]) detail::paint(*img, *supports[k], cfg.objects[k].color);

        // Later-painted objects and occluders remove pixels from earlier
        // objects' visible supports.
        for (std::size_t k = 0; k < cfg.objects.size(); ++k) {
            if (!supports[k]) continue;
            for (std::size_t j = k + 1; j < cfg.objects.size(); ++j) {
                if (!supports[j]) continue;
                for (int y = 0; y < cfg.height; ++y)
                    for (int x = 0; x < cfg.width; ++x)
                        if (supports[j]->get(x, y)) supports[k]->set(x, y, false);
            }
        }
        for (const auto& occ : cfg.occluders) {
            const auto [cx, cy] = interp_waypoints(occ.waypoints, t);
            const BitMask s =
                detail::render_support(ShapeKind::Rectangle, cx, cy, occ.rx, occ.ry, cfg.width, cfg.height);
            detail::paint(*img, s, occ.color);
            for (auto& sup : supports) {
                if (!sup) continue;
                for (int y = 0; y < cfg.height; ++y)
                    for (int x = 0; x < cfg.width; ++x)
                        if (s.get(x, y)) sup->set(x, y, false);
            }
        }

        if (cfg.noise_amplitude > 0) {
            Rng noise(mix_seed(cfg.seed, 0xBA5Eu, static_cast<std::uint64_t>(t)));
            for (auto& v : img->pixels) {
                const long n = noise.uniform_int(-cfg.noise_amplitude, cfg.noise_amplitude);
                v = static_cast<std::uint8_t>(std::clamp<long>(v + n, 0, 255));
            }
        }

        seq.frames.push_back(std::move(img));
        for (std::size_t k = 0; k < cfg.objects.size(); ++k) {
            if (supports[k] && !supports[k]->empty())
                seq.objects[k].masks[t] = std::move(*supports[k]);
        }
    }

    for (std::size_t k = 0; k < cfg.objects.size(); ++k) {
        if (!seq.objects[k].masks[0])
            throw std::invalid_argument("generate_synthetic: object " + std::to_string(k + 1) +
                                        " absent in first frame");
        seq.first_boxes.push_back(box_from_mask(*seq.objects[k].masks[0]));
    }
    return seq;
}

// ---------------------------------------------------------------------------
// Directory layout: frames/%05d.png (RGB) and masks/%05d.png (indexed,
// palette value k = object k, 0 = background).

namespace detail {

inline std::string frame_name(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%05d.png", index);
    return buf;
}

}  // namespace detail

inline SequenceData load_sequence(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    const fs::path frames_dir = dir / "frames";
    const fs::path masks_dir = dir / "masks";
    if (!fs::is_directory(frames_dir)) throw std::runtime_error("load_sequence: missing " + frames_dir.string());
    if (!fs::is_directory(masks_dir)) throw std::runtime_error("load_sequence: missing " + masks_dir.string());

    int count = 0;
    while (fs::exists(frames_dir / detail::frame_name(count))) ++count;
    if (count == 0) throw std::runtime_error("load_sequence: no frames in " + frames_dir.string());

    SequenceData seq;
    seq.name = dir.filename().string();
    std::vector<LabelMap> labels;
    for (int t = 0; t < count; ++t) {
        const fs::path fp = frames_dir / detail::frame_name(t);
        const fs::path mp = masks_dir / detail::frame_name(t);
        if (!fs::exists(mp)) throw std::runtime_error("load_sequence: missing mask " + mp.string());
        Image img = read_png_rgb(fp.string());
        LabelMap map = read_png_labels(mp.string());
        if (map.width != img.width || map.height != img.height)
            throw std::runtime_error("load_sequence: frame/mask size mismatch at " + mp.string());
        if (t > 0 && (!seq.frames[0]->same_dims(img)))
            throw std::runtime_error("load_sequence: frame size changed at " + fp.string());
        seq.frames.push_back(std::make_shared<Image>(std::move(img)));
        labels.push_back(std::move(map));
    }

    int max_label = 0;
    for (const auto& map : labels)
        for (std::uint8_t v : map.labels) max_label = std::max(max_label, static_cast<int>(v));
    if (max_label == 0) throw std::runtime_error("load_sequence: no objects in " + masks_dir.string());

    seq.objects.resize(max_label);
    for (auto& o : seq.objects) o.masks.resize(count);
    for (int t = 0; t < count; ++t) {
        const LabelMap& map = labels[t];
        for (int k = 1; k <= max_label; ++k) {
            BitMask m(map.width, map.height);
            bool any = false;
            for (int y = 0; y < map.height; ++y)
                for (int x = 0; x < map.width; ++x)
                    if (map.at(x, y) == k) {
                        m.set(x, y, true);
                        any = true;
                    }
            if (any) seq.objects[k - 1].masks[t] = std::move(m);
        }
    }
    for (int k = 1; k <= max_label; ++k) {
        if (!seq.objects[k - 1].masks[0])
            throw std::runtime_error("load_sequence: object index " + std::to_string(k) +
                                     " has no first-frame ground truth in " + masks_dir.string());
        seq.first_boxes.push_back(box_from_mask(*seq.objects[k - 1].masks[0]));
    }
    return seq;
}

/// Combined label map of one frame's ground truth.
inline LabelMap gt_label_map(const SequenceData& seq, int frame) {
    LabelMap map(seq.frames[frame]->width, seq.frames[frame]->height);
    for (int k = 0; k < seq.object_count(); ++k) {
        const auto& m = seq.objects[k].masks[frame];
        if (!m) continue;
        for (int y = 0; y < map.height; ++y)
            for (int x = 0; x < map.width; ++x)
                if (m->get(x, y)) map.set(x, y, static_cast<std::uint8_t>(k + 1));
    }
    return map;
}

inline void write_sequence(const SequenceData& seq, const std::filesystem::path& dir, bool overwrite = false) {
    namespace fs = std::filesystem;
    if (seq.frames.empty()) throw std::invalid_argument("write_sequence: empty sequence");
    if (!overwrite && fs::exists(dir / "frames"))
        throw std::runtime_error("write_sequence: refusing to overwrite " + dir.string());
    fs::create_directories(dir / "frames");
    fs::create_directories(dir / "masks");
    for (int t = 0; t < seq.frame_count(); ++t) {
        write_png_rgb((dir / "frames" / detail::frame_name(t)).string(), *seq.frames[t]);
        write_png_labels((dir / "masks" / detail::frame_name(t)).string(), gt_label_map(seq, t));
    }
}

}  // namespace votseg
