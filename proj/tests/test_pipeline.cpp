#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include "votseg/pipeline.hpp"
#include "votseg/scenarios.hpp"

using namespace votseg;

namespace {

struct BasicSetup {
    SequenceData seq;
    std::unique_ptr<ScriptedDetector> detector;
};

BasicSetup make_setup(int objects, int frames, std::uint64_t seed, bool identity = true) {
    const Scenario sc = make_basic_scenario(objects, frames, seed, identity);
    BasicSetup s{generate_synthetic(sc.synth), nullptr};
    s.detector = std::make_unique<ScriptedDetector>(s.seq, sc.synth.distractors, sc.script);
    return s;
}

int diag_frame(const std::string& line) {
    return std::stoi(line.substr(line.find("frame ") + 6));
}

bool is_redetect_line(const std::string& line) {
    return line.find("phase redetect") != std::string::npos;
}

}  // namespace

TEST_CASE("tracker config validation") {
    TrackerConfig cfg;
    CHECK_NOTHROW(check_tracker_config(cfg));
    CHECK(cfg.state_dim() == 524);
    cfg.alpha = 0.9;
    CHECK_THROWS_AS(check_tracker_config(cfg), std::invalid_argument);
    cfg = TrackerConfig{};
    cfg.redetect_after = 0;
    CHECK_THROWS_AS(check_tracker_config(cfg), std::invalid_argument);
    cfg = TrackerConfig{};
    cfg.keep_confidence_decay = 0.0;
    CHECK_THROWS_AS(check_tracker_config(cfg), std::invalid_argument);
}

TEST_CASE("init_tracks seeds templates from the first frame boxes") {
    const BasicSetup s = make_setup(2, 4, 17);
    const auto tracks = init_tracks(s.seq);
    REQUIRE(tracks.size() == 2);
    for (std::size_t k = 0; k < 2; ++k) {
        CHECK(tracks[k].id == static_cast<int>(k) + 1);
        CHECK(tracks[k].tmpl.box == s.seq.first_boxes[k]);
        CHECK(tracks[k].prev_box == s.seq.first_boxes[k]);
        CHECK(tracks[k].tmpl.mask.count() == s.seq.first_boxes[k].area());
        CHECK(tracks[k].last_score == 1.0);
        CHECK_FALSE(tracks[k].updated_once);
    }
}

TEST_CASE("search_region picks the expansion ratio by motion and proximity") {
    const TrackerConfig cfg;
    auto frame = std::make_shared<Image>(200, 200);

    std::vector<ObjectTrack> still(1);
    still[0].tmpl = init_template(frame, Box{50, 50, 60, 60});
    still[0].prev_box = Box{50, 50, 60, 60};
    CHECK(search_region(still, 200, 200, cfg) == expand_box(Box{50, 50, 60, 60}, cfg.ratio_mid, 200, 200));

    std::vector<ObjectTrack> fast(1);
    fast[0].tmpl = init_template(frame, Box{50, 50, 60, 60});
    fast[0].prev_box = Box{40, 50, 50, 60};
    CHECK(search_region(fast, 200, 200, cfg) == expand_box(Box{50, 50, 60, 60}, cfg.ratio_big, 200, 200));

    std::vector<ObjectTrack> touching(2);
    touching[0].tmpl = init_template(frame, Box{50, 50, 60, 60});
    touching[0].prev_box = Box{50, 50, 60, 60};
    touching[1].tmpl = init_template(frame, Box{58, 50, 68, 60});
    touching[1].prev_box = Box{58, 50, 68, 60};
    CHECK(search_region(touching, 200, 200, cfg) ==
          expand_box(Box{50, 50, 68, 60}, cfg.ratio_small, 200, 200));

    std::vector<ObjectTrack> apart(2);
    apart[0].tmpl = init_template(frame, Box{20, 20, 40, 40});
    apart[0].prev_box = Box{20, 20, 40, 40};
    apart[1].tmpl = init_template(frame, Box{120, 120, 150, 150});
    apart[1].prev_box = Box{120, 120, 150, 150};
    CHECK(search_region(apart, 200, 200, cfg) ==
          expand_box(Box{20, 20, 150, 150}, cfg.ratio_mid, 200, 200));

    CHECK_THROWS_AS(search_region({}, 200, 200, cfg), std::invalid_argument);
}

TEST_CASE("always updating on exact detections tracks ground truth perfectly") {
    BasicSetup s = make_setup(2, 12, 23);
    const TrackerConfig cfg;
    const SequenceResult result = run_sequence(s.seq, *s.detector, always_update_policy(), cfg);
    REQUIRE(result.masks.size() == 2);
    for (int k = 0; k < 2; ++k) {
        REQUIRE(result.masks[k].size() == 12);
        for (int t = 1; t < 12; ++t) {
            REQUIRE(result.masks[k][t] == *s.seq.objects[k].masks[t]);
            REQUIRE(result.confidences[k][t] > 0.0);
            REQUIRE(result.confidences[k][t] <= 1.0);
        }
    }
    const auto reports = evaluate_sequence(s.seq, result);
    for (const auto& r : reports) {
        CHECK(r.mean_j == 1.0);
        CHECK(r.mean_f == 1.0);
        CHECK(r.frames_evaluated == 11);
    }
}

TEST_CASE("always keeping leaves the output mask bit-identical") {
    BasicSetup s = make_setup(1, 10, 29);
    const TrackerConfig cfg;
    const SequenceResult result = run_sequence(s.seq, *s.detector, always_keep_policy(), cfg);
    double conf = 1.0;
    for (int t = 0; t < 10; ++t) {
        REQUIRE(result.masks[0][t] == result.masks[0][0]);
        REQUIRE(result.confidences[0][t] == conf);
        conf *= cfg.keep_confidence_decay;
    }
}

TEST_CASE("three consecutive keeps trigger one re-detection pass") {
    BasicSetup s = make_setup(1, 10, 31);
    const TrackerConfig cfg;
    const SequenceResult result = run_sequence(s.seq, *s.detector, always_keep_policy(), cfg);

    std::vector<int> redetect_frames;
    for (const auto& line : result.diagnostics)
        if (is_redetect_line(line)) redetect_frames.push_back(diag_frame(line));
    CHECK(redetect_frames == std::vector<int>{3, 6, 9});

    // never twice in the same frame for the same object
    for (std::size_t i = 1; i < redetect_frames.size(); ++i)
        REQUIRE(redetect_frames[i] != redetect_frames[i - 1]);

    // the streak resets after the attempt even though the policy kept
    for (const auto& line : result.diagnostics)
        if (is_redetect_line(line)) REQUIRE(line.find("streak 0") != std::string::npos);
}

TEST_CASE("an update resets the keep streak and defers re-detection") {
    BasicSetup s = make_setup(1, 9, 37);
    const TrackerConfig cfg;
    // keep twice, update once, repeat: streak never reaches three
    int calls = 0;
    const DecisionPolicy cycle = [&](const DecisionQuery&) {
        return ++calls % 3 == 0 ? Action::Update : Action::Keep;
    };
    const SequenceResult result = run_sequence(s.seq, *s.detector, cycle, cfg);
    for (const auto& line : result.diagnostics) CHECK_FALSE(is_redetect_line(line));
}

TEST_CASE("suppressed detections force keeps that decay confidence") {
    const Scenario sc = make_basic_scenario(1, 8, 41, true);
    const SequenceData seq = generate_synthetic(sc.synth);
    DetectorScript script = sc.script;
    script.swap_events = {{0, 1, 3}};  // no detections at frames 1 and 2
    ScriptedDetector det(seq, {}, script);
    const TrackerConfig cfg;
    const SequenceResult result = run_sequence(seq, det, always_update_policy(), cfg);

    int forced_lines = 0;
    for (const auto& line : result.diagnostics)
        forced_lines += line.find("forced 1") != std::string::npos && !is_redetect_line(line);
    CHECK(forced_lines == 2);
    CHECK(result.confidences[0][1] == cfg.keep_confidence_decay);
    CHECK(result.confidences[0][2] == cfg.keep_confidence_decay * cfg.keep_confidence_decay);
    CHECK(result.masks[0][1] == result.masks[0][0]);
    // detection returns at frame 3 and the update snaps back to ground truth
    CHECK(result.masks[0][3] == *seq.objects[0].masks[3]);
}

TEST_CASE("oracle policy matches ground truth when detections are exact") {
    BasicSetup s = make_setup(2, 8, 43);
    const SequenceResult result = run_sequence(s.seq, *s.detector, oracle_policy(s.seq), TrackerConfig{});
    const auto reports = evaluate_sequence(s.seq, result);
    for (const auto& r : reports) CHECK(r.mean_j == 1.0);
}

TEST_CASE("run_sequence is deterministic") {
    BasicSetup a = make_setup(2, 10, 47);
    BasicSetup b = make_setup(2, 10, 47);
    const TrackerConfig cfg;
    const SequenceResult ra = run_sequence(a.seq, *a.detector, always_update_policy(), cfg);
    const SequenceResult rb = run_sequence(b.seq, *b.detector, always_update_policy(), cfg);
    REQUIRE(ra.diagnostics == rb.diagnostics);
    for (std::size_t k = 0; k < ra.masks.size(); ++k)
        for (std::size_t t = 0; t < ra.masks[k].size(); ++t) {
            REQUIRE(ra.masks[k][t] == rb.masks[k][t]);
            REQUIRE(ra.confidences[k][t] == rb.confidences[k][t]);
        }
}

TEST_CASE("phase timers stay consistent with the wall clock") {
    BasicSetup s = make_setup(2, 10, 53);
    const SequenceResult result = run_sequence(s.seq, *s.detector, always_update_policy(), TrackerConfig{});
    CHECK(result.timers.detection >= 0.0);
    CHECK(result.timers.decision >= 0.0);
    CHECK(result.timers.matching >= 0.0);
    CHECK(result.wall_seconds > 0.0);
    CHECK(result.timers.sum() <= result.wall_seconds + 0.01);
}

TEST_CASE("combined_label_map resolves overlaps by confidence then id") {
    SequenceResult result;
    result.masks.resize(2);
    result.confidences.resize(2);
    result.masks[0].push_back(BitMask::filled_box(16, 16, Box{2, 2, 10, 10}));
    result.masks[1].push_back(BitMask::filled_box(16, 16, Box{6, 6, 14, 14}));

    result.confidences[0] = {0.9};
    result.confidences[1] = {0.5};
    LabelMap map = combined_label_map(result, 0);
    CHECK(map.at(7, 7) == 1);
    CHECK(map.at(12, 12) == 2);
    CHECK(map.at(3, 3) == 1);
    CHECK(map.at(0, 0) == 0);

    result.confidences[0] = {0.5};
    result.confidences[1] = {0.9};
    map = combined_label_map(result, 0);
    CHECK(map.at(7, 7) == 2);

    result.confidences[1] = {0.5};
    map = combined_label_map(result, 0);
    CHECK(map.at(7, 7) == 1);

    CHECK_THROWS_AS(combined_label_map(result, 5), std::invalid_argument);
}

TEST_CASE("train_episode validates its inputs") {
    BasicSetup s = make_setup(1, 8, 59);
    TrackerConfig cfg;
    Rng rng(1);
    AgentNet wrong_dims = make_agent(10, {8}, 1);
    CHECK_THROWS_AS(train_episode(s.seq, 0, 8, *s.detector, wrong_dims, cfg, 0.9, rng), std::invalid_argument);

    AgentNet net = make_agent(feature_dim(cfg.feature_grid), {8, 8}, 1);
    CHECK_THROWS_AS(train_episode(s.seq, 0, 1, *s.detector, net, cfg, 0.9, rng), std::invalid_argument);
    CHECK_THROWS_AS(train_episode(s.seq, -1, 8, *s.detector, net, cfg, 0.9, rng), std::invalid_argument);
}

TEST_CASE("train_episode rejects clips with missing ground truth") {
    Scenario sc = make_basic_scenario(1, 8, 61, true);
    sc.synth.objects[0].absent = {{4, 6}};
    const SequenceData seq = generate_synthetic(sc.synth);
    ScriptedDetector det(seq, {}, sc.script);
    AgentNet net = make_agent(262, {8, 8}, 1);
    Rng rng(1);
    try {
        train_episode(seq, 0, 8, det, net, TrackerConfig{}, 0.9, rng);
        FAIL("expected an exception");
    } catch (const std::exception& e) {
        const std::string msg = e.what();
        CHECK(msg.find("object 1") != std::string::npos);
        CHECK(msg.find("frame 4") != std::string::npos);
    }
}

TEST_CASE("train_episode processes one transition per consultation") {
    BasicSetup s = make_setup(2, 8, 67);
    AgentNet net = make_agent(262, {8, 8}, 5);
    Rng rng(9);
    const EpisodeLog log = train_episode(s.seq, 0, 8, *s.detector, net, TrackerConfig{}, 0.9, rng);
    // at least one consultation per object per frame, possibly re-detections on top
    CHECK(log.transitions >= 14);
    CHECK(net.iteration == log.transitions);
    CHECK(std::isfinite(log.mean_reward()));
    CHECK(log.mean_reward() >= -10.0);
    CHECK(log.mean_reward() <= 110.0);
}

TEST_CASE("make_clips yields non-overlapping complete windows") {
    Scenario sc = make_basic_scenario(1, 8, 71, true);
    sc.synth.objects[0].absent = {{3, 5}};
    const SequenceData seq = generate_synthetic(sc.synth);
    ScriptedDetector det(seq, {}, sc.script);
    const auto clips = make_clips(seq, det, 3);
    REQUIRE(clips.size() == 1);
    CHECK(clips[0].begin == 0);
    CHECK(clips[0].end == 3);
    CHECK_THROWS_AS(make_clips(seq, det, 1), std::invalid_argument);

    BasicSetup full = make_setup(1, 8, 73);
    const auto clips2 = make_clips(full.seq, *full.detector, 4);
    REQUIRE(clips2.size() == 2);
    CHECK(clips2[1].begin == 4);
    CHECK(clips2[1].end == 8);
}

TEST_CASE("train stops at the transition budget") {
    BasicSetup s = make_setup(1, 10, 79);
    const auto clips = make_clips(s.seq, *s.detector, 5);
    REQUIRE_FALSE(clips.empty());
    AgentNet net = make_agent(262, {8, 8}, 11);
    TrainOptions opt;
    opt.batch_size = 3;
    opt.budget = 30;
    opt.seed = 4;
    const TrainResult result = train(clips, net, TrackerConfig{}, opt);
    CHECK(result.transitions >= 30);
    CHECK(result.transitions <= 30 + 20);
    CHECK(result.transitions == net.iteration);
    REQUIRE_FALSE(result.curve.empty());
    for (std::size_t i = 1; i < result.curve.size(); ++i) {
        CHECK(result.curve[i].episode == result.curve[i - 1].episode + 1);
        CHECK(result.curve[i].transitions > result.curve[i - 1].transitions);
    }
    CHECK_THROWS_AS(train({}, net, TrackerConfig{}, opt), std::invalid_argument);
}

TEST_CASE("training is reproducible for a fixed seed") {
    BasicSetup s1 = make_setup(1, 10, 83);
    BasicSetup s2 = make_setup(1, 10, 83);
    const auto clips1 = make_clips(s1.seq, *s1.detector, 5);
    const auto clips2 = make_clips(s2.seq, *s2.detector, 5);
    AgentNet n1 = make_agent(262, {8, 8}, 13);
    AgentNet n2 = make_agent(262, {8, 8}, 13);
    TrainOptions opt;
    opt.budget = 40;
    opt.seed = 21;
    train(clips1, n1, TrackerConfig{}, opt);
    train(clips2, n2, TrackerConfig{}, opt);
    CHECK(n1.actor.param_vector() == n2.actor.param_vector());
    CHECK(n1.critic.param_vector() == n2.critic.param_vector());
}
