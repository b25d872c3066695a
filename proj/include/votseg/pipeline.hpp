#pragma once

#include <chrono>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "votseg/agent.hpp"
#include "votseg/datasets.hpp"
#include "votseg/features.hpp"
#include "votseg/matching.hpp"
#include "votseg/metrics.hpp"
#include "votseg/proposals.hpp"
#include "votseg/template.hpp"

namespace votseg {

struct TrackerConfig {
    double alpha_first = 1.0;  // box-overlap-only matching until the first Update
    double beta_first = 0.0;
    double alpha = 0.5;
    double beta = 0.5;
    int redetect_after = 3;  // consecutive Keeps before a full-frame re-detection
    double ratio_big = 2.0;
    double ratio_mid = 1.5;
    double ratio_small = 1.2;
    double displacement_threshold = 0.35;  // fraction of the previous box diagonal
    int proposal_cap = 20;
    int feature_grid = 16;
    double keep_confidence_decay = 0.9;

    int state_dim() const { return 2 * feature_dim(feature_grid); }
};

inline void check_tracker_config(const TrackerConfig& cfg) {
    check_weights(MatchWeights{cfg.alpha_first, cfg.beta_first});
    check_weights(MatchWeights{cfg.alpha, cfg.beta});
    if (cfg.redetect_after < 1) throw std::invalid_argument("TrackerConfig: redetect_after must be >= 1");
    if (cfg.ratio_big < 1 || cfg.ratio_mid < 1 || cfg.ratio_small < 1)
        throw std::invalid_argument("TrackerConfig: expansion ratios must be >= 1");
    if (cfg.displacement_threshold < 0) throw std::invalid_argument("TrackerConfig: negative displacement threshold");
    if (cfg.proposal_cap < 1) throw std::invalid_argument("TrackerConfig: proposal cap must be >= 1");
    if (cfg.feature_grid < 1) throw std::invalid_argument("TrackerConfig: feature grid must be >= 1");
    if (cfg.keep_confidence_decay <= 0 || cfg.keep_confidence_decay > 1)
        throw std::invalid_argument("TrackerConfig: keep confidence decay outside (0,1]");
}

struct ObjectTrack {
    int id = 0;
    TargetTemplate tmpl;
    Box prev_box;  // template box before the previous frame's decision
    int keep_streak = 0;
    double last_score = 1.0;
    bool updated_once = false;
};

inline std::vector<ObjectTrack> init_tracks(const SequenceData& seq) {
    if (seq.frames.empty()) throw std::invalid_argument("init_tracks: empty sequence");
    std::vector<ObjectTrack> tracks;
    for (int k = 0; k < seq.object_count(); ++k) {
        ObjectTrack tr;
        tr.id = k + 1;
        tr.tmpl = init_template(seq.frames[0], seq.first_boxes[k]);
        tr.prev_box = seq.first_boxes[k];
        tracks.push_back(std::move(tr));
    }
    return tracks;
}

/// One region shared by all targets: the enclosing box of the current
/// template boxes, expanded by the ratio the situation calls for. Fast
/// motion takes the big ratio, touching targets the small one, everything
/// else the middle one.
inline Box search_region(const std::vector<ObjectTrack>& tracks, int frame_w, int frame_h,
                         const TrackerConfig& cfg) {
    if (tracks.empty()) throw std::invalid_argument("search_region: no tracks");
    std::vector<Box> boxes;
    for (const auto& tr : tracks) boxes.push_back(tr.tmpl.box);
    const Box bm = enclosing_box(boxes);

    bool fast = false;
    for (const auto& tr : tracks) {
        const double dx = tr.tmpl.box.center_x() - tr.prev_box.center_x();
        const double dy = tr.tmpl.box.center_y() - tr.prev_box.center_y();
        if (std::sqrt(dx * dx + dy * dy) > cfg.displacement_threshold * tr.tmpl.box.diagonal()) {
            fast = true;
            break;
        }
    }
    double ratio = cfg.ratio_mid;
    if (fast) {
        ratio = cfg.ratio_big;
    } else {
        for (std::size_t i = 0; i < boxes.size() && ratio == cfg.ratio_mid; ++i)
            for (std::size_t j = i + 1; j < boxes.size(); ++j)
                if (box_iou(boxes[i], boxes[j]) > 0) {
                    ratio = cfg.ratio_small;
                    break;
                }
    }
    return expand_box(bm, ratio, frame_w, frame_h);
}

// ---------------------------------------------------------------------------
// Decision plumbing. The pipeline asks a policy callback for every candidate
// it considers; trainers wrap the agent here and observe every consultation.

enum class DecisionPhase { Matching, Redetection };

struct DecisionQuery {
    int object_id = 0;
    int frame_index = 0;
    DecisionPhase phase = DecisionPhase::Matching;
    const StateVec& state;
    const ObjectTrack& track;        // state before the decision
    const PredictedResult& candidate;
};

using DecisionPolicy = std::function<Action(const DecisionQuery&)>;

inline DecisionPolicy always_update_policy() {
    return [](const DecisionQuery&) { return Action::Update; };
}

inline DecisionPolicy always_keep_policy() {
    return [](const DecisionQuery&) { return Action::Keep; };
}

/// Greedy agent decisions for evaluation.
inline DecisionPolicy agent_policy(const AgentNet& net) {
    return [&net](const DecisionQuery& q) {
        Rng unused(0);
        return sample_action(actor_forward(net, q.state), SampleMode::Greedy, unused);
    };
}

/// Picks whichever action yields the higher overlap with ground truth,
/// preferring Update on ties. An upper bound for decision quality given the
/// candidates actually offered.
inline DecisionPolicy oracle_policy(const SequenceData& seq) {
    return [&seq](const DecisionQuery& q) {
        const auto& gt = seq.objects[q.object_id - 1].masks[q.frame_index];
        if (!gt) return Action::Keep;
        const double j_update = mask_iou(q.candidate.mask, *gt);
        const double j_keep = mask_iou(q.track.tmpl.mask, *gt);
        return j_update >= j_keep ? Action::Update : Action::Keep;
    };
}

// ---------------------------------------------------------------------------
// Per-frame step

struct PhaseTimers {
    double detection = 0;
    double matching = 0;
    double decision = 0;

    double sum() const { return detection + matching + decision; }
};

struct StepObjectResult {
    Action action = Action::Keep;
    double confidence = 1.0;
    bool forced_keep = false;
    bool redetected = false;
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline std::string top_scores(std::vector<double> scores) {
    if (scores.empty()) return "none";
    std::sort(scores.begin(), scores.end(), std::greater<>());
    std::string out;
    for (std::size_t i = 0; i < scores.size() && i < 3; ++i) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", scores[i]);
        if (i) out += ',';
        out += buf;
    }
    return out;
}

inline std::string diag_line(int frame, int obj, DecisionPhase phase, Action action, bool forced, double score,
                             const std::string& top, int streak, bool redetect) {
    char buf[192];
    std::snprintf(buf, sizeof(buf), "frame %d obj %d phase %s action %s forced %d score %.17g top %s streak %d redetect %d",
                  frame, obj, phase == DecisionPhase::Matching ? "match" : "redetect", action_name(action),
                  forced ? 1 : 0, score, top.c_str(), streak, redetect ? 1 : 0);
    return buf;
}

}  // namespace detail

/// Advances every track through one frame: shared-region proposal matching,
/// one decision per candidate, and at most one full-frame re-detection per
/// object once its keep streak reaches the threshold.
inline std::vector<StepObjectResult> step_frame(const ImagePtr& frame, int frame_index,
                                                std::vector<ObjectTrack>& tracks, ProposalSource& detector,
                                                const DecisionPolicy& decide, const TrackerConfig& cfg,
                                                StateScratch& scratch, std::vector<std::string>* diagnostics,
                                                PhaseTimers* timers) {
    using clock = std::chrono::steady_clock;
    const auto frame_start = clock::now();
    if (!frame) throw std::invalid_argument("step_frame: null frame");
    if (tracks.empty()) throw std::invalid_argument("step_frame: no tracks");

    const Box full{0, 0, frame->width, frame->height};
    const Box region = search_region(tracks, frame->width, frame->height, cfg);

    auto det_start = clock::now();
    const std::vector<Proposal> region_proposals = detector.propose(frame_index, region);
    double det_seconds = detail::seconds_since(det_start);
    double dec_seconds = 0;

    std::vector<StepObjectResult> results;
    std::vector<Proposal> full_proposals;
    bool full_loaded = false;

    for (auto& track : tracks) {
        StepObjectResult res;
        const Box box_before = track.tmpl.box;
        const double prev_score = track.last_score;
        const MatchWeights weights = track.updated_once ? MatchWeights{cfg.alpha, cfg.beta}
                                                        : MatchWeights{cfg.alpha_first, cfg.beta_first};

        std::vector<double> scores;
        scores.reserve(region_proposals.size());
        for (const auto& p : region_proposals) scores.push_back(score_iou(track.tmpl, p, weights));
        const std::optional<std::size_t> best = select_best(scores);

        if (!best) {
            // Nothing to decide on; treat as Keep so the streak still grows
            // toward a re-detection.
            res.action = Action::Keep;
            res.forced_keep = true;
            ++track.keep_streak;
            track.last_score = prev_score * cfg.keep_confidence_decay;
        } else {
            const Proposal& p = region_proposals[*best];
            const PredictedResult candidate{frame, p.box, p.mask, scores[*best]};
            const StateVec state = build_state(track.tmpl, candidate, cfg.feature_grid, scratch);
            const auto dec_start = clock::now();
            const Action action =
                decide(DecisionQuery{track.id, frame_index, DecisionPhase::Matching, state, track, candidate});
            if (action == Action::Update) {
                track.tmpl = apply_decision(track.tmpl, candidate, action);
                track.keep_streak = 0;
                track.last_score = scores[*best];
                track.updated_once = true;
            } else {
                ++track.keep_streak;
                track.last_score = prev_score * cfg.keep_confidence_decay;
            }
            dec_seconds += detail::seconds_since(dec_start);
            res.action = action;
        }
        if (diagnostics)
            diagnostics->push_back(detail::diag_line(frame_index, track.id, DecisionPhase::Matching, res.action,
                                                     res.forced_keep, track.last_score,
                                                     detail::top_scores(scores), track.keep_streak, false));

        if (track.keep_streak >= cfg.redetect_after) {
            res.redetected = true;
            if (!full_loaded) {
                det_start = clock::now();
                full_proposals = detector.propose(frame_index, full);
                det_seconds += detail::seconds_since(det_start);
                full_loaded = true;
            }
            std::vector<double> app_scores;
            app_scores.reserve(full_proposals.size());
            for (const auto& p : full_proposals) app_scores.push_back(score_appearance(track.tmpl, p, *frame));
            const std::optional<std::size_t> best_app = select_best(app_scores);
            Action action = Action::Keep;
            if (best_app) {
                const Proposal& p = full_proposals[*best_app];
                const PredictedResult candidate{frame, p.box, p.mask, app_scores[*best_app]};
                const StateVec state = build_state(track.tmpl, candidate, cfg.feature_grid, scratch);
                const auto dec_start = clock::now();
                action = decide(
                    DecisionQuery{track.id, frame_index, DecisionPhase::Redetection, state, track, candidate});
                if (action == Action::Update) {
                    track.tmpl = apply_decision(track.tmpl, candidate, action);
                    track.last_score = app_scores[*best_app];
                    track.updated_once = true;
                }
                dec_seconds += detail::seconds_since(dec_start);
            }
            track.keep_streak = 0;
            if (diagnostics)
                diagnostics->push_back(detail::diag_line(frame_index, track.id, DecisionPhase::Redetection, action,
                                                         !best_app, track.last_score,
                                                         detail::top_scores(app_scores), track.keep_streak, true));
        }

        track.prev_box = box_before;
        res.confidence = track.last_score;
        results.push_back(res);
    }

    if (timers) {
        const double frame_seconds = detail::seconds_since(frame_start);
        timers->detection += det_seconds;
        timers->decision += dec_seconds;
        timers->matching += frame_seconds - det_seconds - dec_seconds;
    }
    return results;
}

// ---------------------------------------------------------------------------
// Whole-sequence driver

struct SequenceResult {
    std::vector<std::vector<BitMask>> masks;       // [object][frame]; frame 0 is the initial template
    std::vector<std::vector<double>> confidences;  // [object][frame]
    std::vector<std::string> diagnostics;
    PhaseTimers timers;
    double wall_seconds = 0;
};

inline SequenceResult run_sequence(const SequenceData& seq, ProposalSource& detector,
                                   const DecisionPolicy& decide, const TrackerConfig& cfg) {
    check_tracker_config(cfg);
    const auto wall_start = std::chrono::steady_clock::now();
    const auto init_start = wall_start;
    std::vector<ObjectTrack> tracks = init_tracks(seq);
    SequenceResult out;
    out.masks.resize(tracks.size());
    out.confidences.resize(tracks.size());
    for (std::size_t k = 0; k < tracks.size(); ++k) {
        out.masks[k].push_back(tracks[k].tmpl.mask);
        out.confidences[k].push_back(tracks[k].last_score);
    }
    StateScratch scratch;
    out.timers.matching += detail::seconds_since(init_start);

    for (int t = 1; t < seq.frame_count(); ++t) {
        step_frame(seq.frames[t], t, tracks, detector, decide, cfg, scratch, &out.diagnostics, &out.timers);
        const auto collect_start = std::chrono::steady_clock::now();
        for (std::size_t k = 0; k < tracks.size(); ++k) {
            out.masks[k].push_back(tracks[k].tmpl.mask);
            out.confidences[k].push_back(tracks[k].last_score);
        }
        out.timers.matching += detail::seconds_since(collect_start);
    }
    out.wall_seconds = detail::seconds_since(wall_start);
    return out;
}

/// Flattens one frame's per-object masks into an indexed map. Where objects
/// overlap, the higher-confidence object claims the pixel; confidence ties go
/// to the lower object id.
inline LabelMap combined_label_map(const SequenceResult& result, int frame) {
    if (result.masks.empty() || frame < 0 || frame >= static_cast<int>(result.masks[0].size()))
        throw std::invalid_argument("combined_label_map: frame out of range");
    const BitMask& first = result.masks[0][frame];
    LabelMap map(first.width(), first.height());
    std::vector<std::size_t> order(result.masks.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double ca = result.confidences[a][frame];
        const double cb = result.confidences[b][frame];
        if (ca != cb) return ca < cb;
        return a > b;
    });
    for (std::size_t k : order) {
        const BitMask& m = result.masks[k][frame];
        for (int y = 0; y < m.height(); ++y)
            for (int x = 0; x < m.width(); ++x)
                if (m.get(x, y)) map.set(x, y, static_cast<std::uint8_t>(k + 1));
    }
    return map;
}

inline std::vector<MetricsReport> evaluate_sequence(const SequenceData& seq, const SequenceResult& result) {
    std::vector<MetricsReport> reports;
    for (int k = 0; k < seq.object_count(); ++k) {
        std::vector<std::optional<BitMask>> outputs;
        for (const auto& m : result.masks[k]) outputs.emplace_back(m);
        reports.push_back(evaluate_object_track(seq.objects[k], outputs, result.confidences[k]));
    }
    return reports;
}

// ---------------------------------------------------------------------------
// Training. Rewards score the post-decision template mask against ground
// truth, so accepting a bad candidate and clinging to a stale template both
// show up immediately. Each consultation closes the previous transition for
// that object (its state is the successor state); clip ends close the rest
// as terminal.

struct EpisodeLog {
    std::int64_t transitions = 0;
    double reward_sum = 0;

    double mean_reward() const { return transitions ? reward_sum / transitions : 0.0; }
};

inline EpisodeLog train_episode(const SequenceData& seq, int begin, int end, ProposalSource& detector,
                                AgentNet& net, const TrackerConfig& cfg, double gamma, Rng& rng) {
    check_tracker_config(cfg);
    if (begin < 0 || end > seq.frame_count() || end - begin < 2)
        throw std::invalid_argument("train_episode: bad clip range");
    for (int t = begin; t < end; ++t)
        for (int k = 0; k < seq.object_count(); ++k)
            if (!seq.objects[k].masks[t])
                throw std::invalid_argument("train_episode: missing ground truth for object " +
                                            std::to_string(k + 1) + " at frame " + std::to_string(t));
    if (net.actor.input_dim() != cfg.state_dim())
        throw std::invalid_argument("train_episode: agent input dim mismatch");

    std::vector<ObjectTrack> tracks;
    for (int k = 0; k < seq.object_count(); ++k) {
        ObjectTrack tr;
        tr.id = k + 1;
        tr.tmpl = init_template(seq.frames[begin], box_from_mask(*seq.objects[k].masks[begin]));
        tr.prev_box = tr.tmpl.box;
        tracks.push_back(std::move(tr));
    }

    struct Pending {
        StateVec state;
        Action action = Action::Keep;
        double reward = 0;
    };
    std::vector<std::optional<Pending>> pending(tracks.size());
    EpisodeLog log;

    const auto close_pending = [&](std::optional<Pending>& p, const StateVec* next_state) {
        if (!p) return;
        const double v = critic_forward(net, p->state);
        const double v_next = next_state ? critic_forward(net, *next_state) : 0.0;
        const double delta = td_error(p->reward, v_next, v, gamma, next_state == nullptr);
        update_critic(net, p->state, delta);
        update_actor(net, p->state, p->action, delta);
        decay_learning_rates(net);
        ++log.transitions;
        p.reset();
    };

    const DecisionPolicy decide = [&](const DecisionQuery& q) {
        close_pending(pending[q.object_id - 1], &q.state);
        const Action a = sample_action(actor_forward(net, q.state), SampleMode::Stochastic, rng);
        const auto& gt = seq.objects[q.object_id - 1].masks[q.frame_index];
        const BitMask& outcome = a == Action::Update ? q.candidate.mask : q.track.tmpl.mask;
        const double r = reward(mask_iou(outcome, *gt));
        log.reward_sum += r;
        pending[q.object_id - 1] = Pending{q.state, a, r};
        return a;
    };

    StateScratch scratch;
    for (int t = begin + 1; t < end; ++t)
        step_frame(seq.frames[t], t, tracks, detector, decide, cfg, scratch, nullptr, nullptr);
    for (auto& p : pending) close_pending(p, nullptr);
    return log;
}

struct TrainClip {
    const SequenceData* seq = nullptr;
    ProposalSource* detector = nullptr;
    int begin = 0;
    int end = 0;
};

/// Non-overlapping fixed-length windows with complete ground truth.
inline std::vector<TrainClip> make_clips(const SequenceData& seq, ProposalSource& detector, int clip_length = 10) {
    if (clip_length < 2) throw std::invalid_argument("make_clips: clip length must be >= 2");
    std::vector<TrainClip> clips;
    for (int begin = 0; begin + clip_length <= seq.frame_count(); begin += clip_length) {
        bool complete = true;
        for (int t = begin; t < begin + clip_length && complete; ++t)
            for (int k = 0; k < seq.object_count(); ++k)
                if (!seq.objects[k].masks[t]) {
                    complete = false;
                    break;
                }
        if (complete) clips.push_back(TrainClip{&seq, &detector, begin, begin + clip_length});
    }
    return clips;
}

struct TrainOptions {
    int batch_size = 20;
    std::int64_t budget = 50000;  // transitions to process
    double gamma = kDefaultGamma;
    std::uint64_t seed = 0;
};

struct TrainCurveRow {
    int episode = 0;
    std::int64_t transitions = 0;
    double mean_reward = 0;
    double lr_actor = 0;
    double lr_critic = 0;
};

struct TrainResult {
    std::vector<TrainCurveRow> curve;
    std::int64_t transitions = 0;
};

inline TrainResult train(const std::vector<TrainClip>& clips, AgentNet& net, const TrackerConfig& cfg,
                         const TrainOptions& opt) {
    if (clips.empty()) throw std::invalid_argument("train: no clips");
    if (opt.batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
    TrainResult result;
    Rng rng(mix_seed(opt.seed, 0x72A17u));
    int episode = 0;
    while (result.transitions < opt.budget) {
        for (int b = 0; b < opt.batch_size && result.transitions < opt.budget; ++b) {
            const auto& clip = clips[static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<long>(clips.size()) - 1))];
            const EpisodeLog log =
                train_episode(*clip.seq, clip.begin, clip.end, *clip.detector, net, cfg, opt.gamma, rng);
            result.transitions += log.transitions;
            result.curve.push_back(
                TrainCurveRow{episode++, result.transitions, log.mean_reward(), net.lr_actor, net.lr_critic});
        }
    }
    return result;
}

}  // namespace votseg
