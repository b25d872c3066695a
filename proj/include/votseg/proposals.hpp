#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "votseg/datasets.hpp"
#include "votseg/geometry.hpp"
#include "votseg/matching.hpp"
#include "votseg/rng.hpp"

namespace votseg {

// ---------------------------------------------------------------------------
// Run-length codec. Runs are comma-separated counts over row-major pixels,
// alternating background/foreground and starting with background (a leading
// zero-length run encodes a mask whose first pixel is foreground).

inline std::string encode_rle(const BitMask& m) {
    std::string out;
    std::int64_t run = 0;
    bool fg = false;
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            if (m.get(x, y) == fg) {
                ++run;
                continue;
            }
            out += std::to_string(run);
            out += ',';
            fg = !fg;
            run = 1;
        }
    }
    out += std::to_string(run);
    return out;
}

inline BitMask decode_rle(const std::string& rle, int width, int height, const std::string& what) {
    BitMask m(width, height);
    const std::int64_t total = static_cast<std::int64_t>(width) * height;
    std::int64_t pos = 0;
    bool fg = false;
    std::size_t i = 0;
    while (i < rle.size()) {
        std::size_t j = i;
        while (j < rle.size() && rle[j] != ',') ++j;
        std::int64_t run = 0;
        if (i == j) throw std::runtime_error(what + ": empty run in rle");
        for (std::size_t c = i; c < j; ++c) {
            if (rle[c] < '0' || rle[c] > '9') throw std::runtime_error(what + ": bad rle character");
            run = run * 10 + (rle[c] - '0');
            if (run > total) throw std::runtime_error(what + ": rle run exceeds frame");
        }
        if (pos + run > total) throw std::runtime_error(what + ": rle runs exceed frame");
        if (fg) {
            for (std::int64_t p = pos; p < pos + run; ++p)
                m.set(static_cast<int>(p % width), static_cast<int>(p / width), true);
        }
        pos += run;
        fg = !fg;
        i = j + 1;
    }
    if (pos != total) throw std::runtime_error(what + ": rle covers " + std::to_string(pos) + " of " +
                                               std::to_string(total) + " pixels");
    return m;
}

// ---------------------------------------------------------------------------
// Proposal files: props_%05d.txt, one proposal per line as
// "confidence x0 y0 x1 y1 rle".

namespace detail {

inline std::string props_name(int index) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "props_%05d.txt", index);
    return buf;
}

}  // namespace detail

inline void write_proposals(const std::filesystem::path& dir, int frame_index,
                            const std::vector<Proposal>& proposals) {
    std::filesystem::create_directories(dir);
    const auto path = dir / detail::props_name(frame_index);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_proposals: cannot open " + path.string());
    for (const auto& p : proposals) {
        char head[96];
        std::snprintf(head, sizeof(head), "%.17g %d %d %d %d ", p.confidence, p.box.x0, p.box.y0, p.box.x1,
                      p.box.y1);
        out << head << encode_rle(p.mask) << '\n';
    }
    if (!out) throw std::runtime_error("write_proposals: write failed for " + path.string());
}

inline std::vector<Proposal> load_proposals(const std::filesystem::path& dir, int frame_index, int width,
                                            int height) {
    const auto path = dir / detail::props_name(frame_index);
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_proposals: cannot open " + path.string());
    std::vector<Proposal> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string what = path.filename().string() + " line " + std::to_string(line_no);
        std::istringstream ss(line);
        double confidence = 0;
        Box box{};
        std::string rle;
        if (!(ss >> confidence)) throw std::runtime_error(what + ": bad confidence");
        if (!std::isfinite(confidence) || confidence < 0)
            throw std::runtime_error(what + ": confidence out of range");
        if (!(ss >> box.x0 >> box.y0 >> box.x1 >> box.y1)) throw std::runtime_error(what + ": bad box");
        if (!box.valid() || box.x0 < 0 || box.y0 < 0 || box.x1 > width || box.y1 > height)
            throw std::runtime_error(what + ": box outside frame");
        if (!(ss >> rle)) throw std::runtime_error(what + ": missing rle");
        Proposal p{box, decode_rle(rle, width, height, what), confidence};
        if (p.mask.empty()) throw std::runtime_error(what + ": empty mask");
        out.push_back(std::move(p));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Proposal sources

/// Supplies the candidate detections for one frame, already restricted to a
/// search region (pass the full frame box to get everything).
class ProposalSource {
  public:
    virtual ~ProposalSource() = default;
    virtual std::vector<Proposal> propose(int frame_index, const Box& region) = 0;
};

/// Keeps proposals whose support intersects the region, clipped to it, in
/// descending confidence order, at most `cap` of them.
inline std::vector<Proposal> clip_proposals(const std::vector<Proposal>& all, const Box& region, int cap) {
    std::vector<Proposal> out;
    for (const auto& p : all) {
        BitMask clipped = p.mask;
        clipped.clip_to(region);
        if (clipped.empty()) continue;
        Box box = box_from_mask(clipped);
        out.push_back(Proposal{box, std::move(clipped), p.confidence});
        if (static_cast<int>(out.size()) == cap) break;
    }
    return out;
}

/// Suppression window for one object's true detection.
struct SwapEvent {
    int object = 0;  // zero-based object index
    int begin = 0;
    int end = 0;     // half-open frame interval
};

struct DetectorScript {
    double box_jitter = 0.03;   // translation noise as a fraction of box size
    int morph_radius = 1;       // random dilation (+) or erosion (-) radius bound
    double dropout_prob = 0.0;  // chance of missing an object outright
    std::vector<SwapEvent> swap_events;
    double distractor_confidence_scale = 0.5;
    int proposal_cap = 20;
    std::uint64_t seed = 0;
};

/// Derives proposals from a sequence's ground truth, perturbed per script.
/// Every perturbation draws from a stream keyed by (seed, frame, emitter), so
/// results do not depend on query order. Distractor proposals reproduce the
/// rendered lookalikes: the source ground truth translated by the offset
/// track.
class ScriptedDetector : public ProposalSource {
  public:
    ScriptedDetector(const SequenceData& seq, std::vector<SynthDistractor> distractors, DetectorScript script)
        : seq_(seq), distractors_(std::move(distractors)), script_(std::move(script)) {}

    std::vector<Proposal> propose(int frame_index, const Box& region) override {
        const auto it = cache_.find(frame_index);
        if (it != cache_.end()) return clip_proposals(it->second, region, script_.proposal_cap);
        std::vector<Proposal> all = generate(frame_index);
        std::stable_sort(all.begin(), all.end(),
                         [](const Proposal& a, const Proposal& b) { return a.confidence > b.confidence; });
        auto [slot, inserted] = cache_.emplace(frame_index, std::move(all));
        (void)inserted;
        return clip_proposals(slot->second, region, script_.proposal_cap);
    }

  private:
    bool suppressed(int object, int frame) const {
        for (const auto& ev : script_.swap_events)
            if (ev.object == object && frame >= ev.begin && frame < ev.end) return true;
        return false;
    }

    /// Shared perturbation pipeline for true and distractor detections.
    /// Confidence is the overlap the perturbed mask retains with its source,
    /// scaled for distractors.
    std::optional<Proposal> perturb(const BitMask& source, Rng& rng, double confidence_scale) const {
        BitMask mask = source;
        if (script_.morph_radius > 0) {
            const long r = rng.uniform_int(-script_.morph_radius, script_.morph_radius);
            if (r > 0) mask = dilate_mask(mask, static_cast<int>(r));
            if (r < 0) {
                BitMask eroded = erode_mask(mask, static_cast<int>(-r));
                if (!eroded.empty()) mask = std::move(eroded);
            }
        }
        if (script_.box_jitter > 0) {
            const Box b = box_from_mask(mask);
            const int dx = static_cast<int>(std::lround(rng.uniform(-1.0, 1.0) * script_.box_jitter * b.width()));
            const int dy = static_cast<int>(std::lround(rng.uniform(-1.0, 1.0) * script_.box_jitter * b.height()));
            BitMask moved = translate_mask(mask, dx, dy);
            if (moved.empty()) return std::nullopt;
            mask = std::move(moved);
        }
        const double confidence = confidence_scale * mask_iou(mask, source);
        Box box = box_from_mask(mask);
        return Proposal{box, std::move(mask), confidence};
    }

    std::vector<Proposal> generate(int frame_index) const {
        std::vector<Proposal> out;
        for (int k = 0; k < seq_.object_count(); ++k) {
            const auto& gt = seq_.objects[k].masks[frame_index];
            if (!gt) continue;
            Rng rng(mix_seed(script_.seed, static_cast<std::uint64_t>(frame_index),
                             static_cast<std::uint64_t>(k + 1)));
            const bool dropped = script_.dropout_prob > 0 && rng.bernoulli(script_.dropout_prob);
            if (dropped || suppressed(k, frame_index)) continue;
            if (auto p = perturb(*gt, rng, 1.0)) out.push_back(std::move(*p));
        }
        for (std::size_t d = 0; d < distractors_.size(); ++d) {
            const auto& lookalike = distractors_[d];
            const auto& gt = seq_.objects[lookalike.source].masks[frame_index];
            if (!gt) continue;
            const auto [ox, oy] = interp_waypoints(lookalike.offsets, frame_index);
            const BitMask base = translate_mask(*gt, static_cast<int>(std::lround(ox)),
                                                static_cast<int>(std::lround(oy)));
            if (base.empty()) continue;
            Rng rng(mix_seed(script_.seed, static_cast<std::uint64_t>(frame_index),
                             0x5151u + static_cast<std::uint64_t>(d)));
            if (auto p = perturb(base, rng, script_.distractor_confidence_scale)) out.push_back(std::move(*p));
        }
        return out;
    }

    const SequenceData& seq_;
    std::vector<SynthDistractor> distractors_;
    DetectorScript script_;
    mutable std::unordered_map<int, std::vector<Proposal>> cache_;
};

/// Reads props_%05d.txt files produced by write_proposals.
class FileProposalSource : public ProposalSource {
  public:
    FileProposalSource(std::filesystem::path dir, int width, int height, int cap = 20)
        : dir_(std::move(dir)), width_(width), height_(height), cap_(cap) {}

    std::vector<Proposal> propose(int frame_index, const Box& region) override {
        auto it = cache_.find(frame_index);
        if (it == cache_.end()) {
            auto all = load_proposals(dir_, frame_index, width_, height_);
            std::stable_sort(all.begin(), all.end(),
                             [](const Proposal& a, const Proposal& b) { return a.confidence > b.confidence; });
            it = cache_.emplace(frame_index, std::move(all)).first;
        }
        return clip_proposals(it->second, region, cap_);
    }

  private:
    std::filesystem::path dir_;
    int width_;
    int height_;
    int cap_;
    std::unordered_map<int, std::vector<Proposal>> cache_;
};

}  // namespace votseg
