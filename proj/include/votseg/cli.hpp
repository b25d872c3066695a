#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "votseg/config.hpp"
#include "votseg/gradcheck.hpp"
#include "votseg/metrics.hpp"
#include "votseg/pipeline.hpp"
#include "votseg/png_io.hpp"
#include "votseg/scenarios.hpp"

namespace votseg::cli {

namespace fs = std::filesystem;

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    std::optional<std::int64_t> iterations;
};

inline RunConfig assemble_config(const CommonFlags& flags) {
    RunConfig cfg;
    if (!flags.config_path.empty()) load_config_file(cfg, flags.config_path);
    apply_env_overrides(cfg);
    if (flags.seed) cfg.seed = *flags.seed;
    if (flags.jobs) cfg.jobs = *flags.jobs;
    if (flags.iterations) cfg.train_iterations = *flags.iterations;
    validate_config(cfg);
    return cfg;
}

namespace detail {

inline void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

inline Scenario scenario_from_config(const RunConfig& cfg) {
    if (cfg.synth_preset == "drift") return make_drift_scenario(cfg.seed, cfg.synth_frames);
    return make_basic_scenario(cfg.synth_objects, cfg.synth_frames, cfg.seed, true);
}

}  // namespace detail

inline void cmd_synth(const RunConfig& cfg, const std::string& out_dir, const std::string& proposals_out,
                      bool overwrite) {
    const Scenario sc = detail::scenario_from_config(cfg);
    const SequenceData seq = generate_synthetic(sc.synth);
    write_sequence(seq, out_dir, overwrite);
    detail::write_text_file(fs::path(out_dir) / "config.txt", dump_config(cfg));
    if (!proposals_out.empty()) {
        ScriptedDetector det(seq, sc.synth.distractors, sc.script);
        const Box full{0, 0, seq.frames[0]->width, seq.frames[0]->height};
        for (int t = 0; t < seq.frame_count(); ++t) write_proposals(proposals_out, t, det.propose(t, full));
    }
    std::printf("synth: wrote %d frames, %d objects to %s\n", seq.frame_count(), seq.object_count(),
                out_dir.c_str());
}

inline void cmd_train(const RunConfig& cfg, const std::vector<std::string>& data_dirs, const std::string& preset,
                      const std::string& out_checkpoint, std::string curve_path) {
    if (data_dirs.empty() && preset.empty())
        throw std::invalid_argument("train: need --data or --preset drift-train");
    if (!preset.empty() && preset != "drift-train")
        throw std::invalid_argument("train: unknown preset '" + preset + "'");
    if (curve_path.empty()) curve_path = out_checkpoint + ".curve.txt";

    AgentNet net = make_agent(feature_dim(cfg.tracker.feature_grid), cfg.seed);
    net.lr_actor = cfg.train_lr_actor;
    net.lr_critic = cfg.train_lr_critic;
    net.lr_decay = cfg.train_lr_decay;
    net.lr_decay_every = cfg.train_lr_decay_every;

    std::vector<std::unique_ptr<SequenceData>> seqs;
    std::vector<std::unique_ptr<ScriptedDetector>> detectors;
    std::vector<TrainClip> clips;
    const auto add_sequence = [&](SequenceData seq, std::vector<SynthDistractor> distractors,
                                  DetectorScript script) {
        seqs.push_back(std::make_unique<SequenceData>(std::move(seq)));
        detectors.push_back(
            std::make_unique<ScriptedDetector>(*seqs.back(), std::move(distractors), std::move(script)));
        const auto more = make_clips(*seqs.back(), *detectors.back(), cfg.train_clip_length);
        clips.insert(clips.end(), more.begin(), more.end());
    };

    if (preset == "drift-train") {
        for (const Scenario& sc : make_drift_training_set(mix_seed(cfg.seed, 0x7EA12u), 20))
            add_sequence(generate_synthetic(sc.synth), sc.synth.distractors, sc.script);
    }
    for (std::size_t i = 0; i < data_dirs.size(); ++i)
        add_sequence(load_sequence(data_dirs[i]), {},
                     detector_script_from_config(cfg, mix_seed(0xDA7Au, static_cast<std::uint64_t>(i))));
    if (clips.empty()) throw std::runtime_error("train: no usable clips (missing ground truth?)");

    const TrainResult result = train(clips, net, cfg.tracker, train_options_from_config(cfg));
    save_checkpoint(net, out_checkpoint);

    std::string curve = "# episode transitions mean_reward lr_actor lr_critic\n";
    for (const auto& row : result.curve) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%d %lld %.17g %.17g %.17g\n", row.episode,
                      static_cast<long long>(row.transitions), row.mean_reward, row.lr_actor, row.lr_critic);
        curve += buf;
    }
    detail::write_text_file(curve_path, curve);
    detail::write_text_file(out_checkpoint + ".config.txt", dump_config(cfg));
    std::printf("train: %zu episodes, %lld transitions, checkpoint %s\n", result.curve.size(),
                static_cast<long long>(result.transitions), out_checkpoint.c_str());
}

inline void cmd_track(const RunConfig& cfg, const std::string& data_dir, const std::string& checkpoint,
                      std::string policy_name, const std::string& detector_name, const std::string& proposals_dir,
                      const std::string& out_dir, bool overwrite) {
    const SequenceData seq = load_sequence(data_dir);
    const int width = seq.frames[0]->width;
    const int height = seq.frames[0]->height;

    std::unique_ptr<ProposalSource> detector;
    const fs::path snapshot = fs::path(data_dir) / "config.txt";
    if (detector_name == "script" && fs::exists(snapshot)) {
        // A generated sequence carries its settings, so the tracker faces the
        // same detector the scenario was built with, lookalikes and all.
        RunConfig synth_cfg;
        load_config_file(synth_cfg, snapshot.string());
        const Scenario sc = detail::scenario_from_config(synth_cfg);
        detector = std::make_unique<ScriptedDetector>(seq, sc.synth.distractors, sc.script);
    } else if (detector_name == "script" || detector_name == "config") {
        detector = std::make_unique<ScriptedDetector>(seq, std::vector<SynthDistractor>{},
                                                      detector_script_from_config(cfg));
    } else if (detector_name == "files") {
        if (proposals_dir.empty()) throw std::invalid_argument("track: --detector files needs --proposals");
        detector = std::make_unique<FileProposalSource>(proposals_dir, width, height, cfg.detector_proposal_cap);
    } else {
        throw std::invalid_argument("track: --detector must be script, config or files");
    }

    if (policy_name.empty()) policy_name = checkpoint.empty() ? "update" : "agent";
    std::optional<AgentNet> net;
    DecisionPolicy decide;
    if (policy_name == "agent") {
        if (checkpoint.empty()) throw std::invalid_argument("track: --policy agent needs --checkpoint");
        net = load_checkpoint(checkpoint, feature_dim(cfg.tracker.feature_grid));
        decide = agent_policy(*net);
    } else if (policy_name == "update") {
        decide = always_update_policy();
    } else if (policy_name == "keep") {
        decide = always_keep_policy();
    } else if (policy_name == "oracle") {
        decide = oracle_policy(seq);
    } else {
        throw std::invalid_argument("track: --policy must be agent, update, keep or oracle");
    }

    const SequenceResult result = run_sequence(seq, *detector, decide, cfg.tracker);

    const fs::path out(out_dir);
    if (!overwrite && fs::exists(out / "masks"))
        throw std::runtime_error("track: refusing to overwrite " + (out / "masks").string());
    fs::create_directories(out / "masks");
    for (int t = 0; t < seq.frame_count(); ++t) {
        char name[16];
        std::snprintf(name, sizeof(name), "%05d.png", t);
        write_png_labels((out / "masks" / name).string(), combined_label_map(result, t));
    }
    std::string conf_text;
    for (int t = 0; t < seq.frame_count(); ++t)
        for (std::size_t k = 0; k < result.confidences.size(); ++k) {
            char buf[80];
            std::snprintf(buf, sizeof(buf), "frame %d obj %zu %.17g\n", t, k + 1, result.confidences[k][t]);
            conf_text += buf;
        }
    detail::write_text_file(out / "confidences.txt", conf_text);
    std::string diag_text;
    for (const auto& line : result.diagnostics) {
        diag_text += line;
        diag_text += '\n';
    }
    detail::write_text_file(out / "diag.txt", diag_text);
    char timings[256];
    std::snprintf(timings, sizeof(timings),
                  "detection_seconds %.9f\nmatching_seconds %.9f\ndecision_seconds %.9f\nwall_seconds %.9f\n",
                  result.timers.detection, result.timers.matching, result.timers.decision, result.wall_seconds);
    detail::write_text_file(out / "timings.txt", timings);
    detail::write_text_file(out / "config.txt", dump_config(cfg));
    std::printf("track: %d frames, %d objects, %.3fs -> %s\n", seq.frame_count(), seq.object_count(),
                result.wall_seconds, out_dir.c_str());
}

inline void cmd_eval(const std::string& pred_dir, const std::string& gt_dir, std::string out_file) {
    const SequenceData gt = load_sequence(gt_dir);
    if (out_file.empty()) out_file = (fs::path(pred_dir) / "metrics.txt").string();

    std::vector<LabelMap> pred_maps;
    for (int t = 0; t < gt.frame_count(); ++t) {
        char name[16];
        std::snprintf(name, sizeof(name), "%05d.png", t);
        const fs::path path = fs::path(pred_dir) / "masks" / name;
        if (!fs::exists(path)) throw std::runtime_error("eval: missing prediction " + path.string());
        LabelMap map = read_png_labels(path.string());
        if (map.width != gt.frames[t]->width || map.height != gt.frames[t]->height)
            throw std::runtime_error("eval: size mismatch at " + path.string());
        pred_maps.push_back(std::move(map));
    }

    std::map<std::pair<int, int>, double> conf;
    const fs::path conf_path = fs::path(pred_dir) / "confidences.txt";
    if (fs::exists(conf_path)) {
        std::ifstream in(conf_path);
        std::string word;
        int frame = 0;
        int obj = 0;
        double value = 0;
        while (in >> word >> frame >> word >> obj >> value) conf[{frame, obj}] = value;
    }

    std::string report_text;
    MetricsReport overall;
    for (int k = 1; k <= gt.object_count(); ++k) {
        std::vector<std::optional<BitMask>> outputs;
        std::vector<double> confidences;
        for (int t = 0; t < gt.frame_count(); ++t) {
            BitMask m(pred_maps[t].width, pred_maps[t].height);
            bool any = false;
            for (int y = 0; y < m.height(); ++y)
                for (int x = 0; x < m.width(); ++x)
                    if (pred_maps[t].at(x, y) == k) {
                        m.set(x, y, true);
                        any = true;
                    }
            if (any) outputs.emplace_back(std::move(m));
            else outputs.emplace_back(std::nullopt);
            const auto it = conf.find({t, k});
            confidences.push_back(it == conf.end() ? 1.0 : it->second);
        }
        const MetricsReport r = evaluate_object_track(gt.objects[k - 1], outputs, confidences);
        report_text += "object " + std::to_string(k) + "\n" + format_metrics_report(r);
        overall.mean_j += r.mean_j;
        overall.mean_f += r.mean_f;
        overall.mean_jf += r.mean_jf;
        overall.longterm_f += r.longterm_f;
        overall.frames_evaluated += r.frames_evaluated;
    }
    const int n = gt.object_count();
    overall.mean_j /= n;
    overall.mean_f /= n;
    overall.mean_jf /= n;
    overall.longterm_f /= n;
    report_text += "overall\n" + format_metrics_report(overall);

    std::fputs(report_text.c_str(), stdout);
    detail::write_text_file(out_file, report_text);
}

inline int cmd_gradcheck(std::uint64_t seed, bool corrupt) {
    const GradCheckReport report = run_gradient_check(seed, 10, 1e-5, corrupt);
    std::printf("critic max relative error %.6e\n", report.critic_max_rel);
    std::printf("actor max relative error %.6e\n", report.actor_max_rel);
    const bool ok = report.passing(1e-4);
    std::printf("%s\n", ok ? "gradients ok" : "gradient check failed");
    return ok ? 0 : 2;
}

inline int run(int argc, const char* const* argv) {
    CLI::App app{"tracking-by-detection with an update/keep decision agent"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string out_dir;
    std::string proposals_out;
    std::string data_dir;
    std::vector<std::string> data_dirs;
    std::string preset;
    std::string checkpoint;
    std::string curve_path;
    std::string policy_name;
    std::string detector_name = "script";
    std::string proposals_dir;
    std::string pred_dir;
    std::string gt_dir;
    std::string out_file;
    bool overwrite = false;
    bool corrupt = false;

    const auto add_common = [&flags](CLI::App* sub) {
        sub->add_option("--config", flags.config_path, "key=value config file");
        sub->add_option("--seed", flags.seed, "master RNG seed");
        sub->add_option("--jobs", flags.jobs, "worker count (results are independent of it)");
    };

    std::optional<int> synth_frames;
    std::optional<int> synth_objects;
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic sequence");
    add_common(synth);
    synth->add_option("--out", out_dir, "output sequence directory")->required();
    synth->add_option("--preset", preset, "synth preset: basic or drift");
    synth->add_option("--frames", synth_frames, "sequence length");
    synth->add_option("--objects", synth_objects, "object count for the basic preset");
    synth->add_option("--proposals-out", proposals_out, "also write detector proposal files here");
    synth->add_flag("--overwrite", overwrite, "allow writing into an existing directory");

    CLI::App* train = app.add_subcommand("train", "train the decision agent");
    add_common(train);
    train->add_option("--iterations", flags.iterations, "transition budget");
    train->add_option("--data", data_dirs, "sequence directories with ground truth");
    train->add_option("--preset", preset, "built-in training set: drift-train");
    train->add_option("--out", checkpoint, "output checkpoint path")->required();
    train->add_option("--curve", curve_path, "training curve path (default <out>.curve.txt)");

    CLI::App* track = app.add_subcommand("track", "track a sequence");
    add_common(track);
    track->add_option("--data", data_dir, "sequence directory")->required();
    track->add_option("--checkpoint", checkpoint, "agent checkpoint");
    track->add_option("--policy", policy_name, "agent, update, keep or oracle");
    track->add_option("--detector", detector_name,
                      "script (sequence settings when present), config, or files");
    track->add_option("--proposals", proposals_dir, "proposal files for --detector files");
    track->add_option("--out", out_dir, "output directory")->required();
    track->add_flag("--overwrite", overwrite, "allow writing into an existing directory");

    CLI::App* eval = app.add_subcommand("eval", "score predictions against ground truth");
    add_common(eval);
    eval->add_option("--pred", pred_dir, "prediction directory (as written by track)")->required();
    eval->add_option("--gt", gt_dir, "ground-truth sequence directory")->required();
    eval->add_option("--out", out_file, "metrics output file (default <pred>/metrics.txt)");

    CLI::App* gradcheck = app.add_subcommand("gradcheck", "verify gradients against finite differences");
    add_common(gradcheck);
    gradcheck->add_flag("--corrupt", corrupt, "perturb one analytic gradient (self-test)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (app.got_subcommand(synth)) {
            RunConfig cfg = assemble_config(flags);
            if (!preset.empty()) set_config_value(cfg, "synth.preset", preset);
            if (synth_frames) cfg.synth_frames = *synth_frames;
            if (synth_objects) cfg.synth_objects = *synth_objects;
            validate_config(cfg);
            cmd_synth(cfg, out_dir, proposals_out, overwrite);
            return 0;
        }
        if (app.got_subcommand(train)) {
            const RunConfig cfg = assemble_config(flags);
            cmd_train(cfg, data_dirs, preset, checkpoint, curve_path);
            return 0;
        }
        if (app.got_subcommand(track)) {
            const RunConfig cfg = assemble_config(flags);
            cmd_track(cfg, data_dir, checkpoint, policy_name, detector_name, proposals_dir, out_dir, overwrite);
            return 0;
        }
        if (app.got_subcommand(eval)) {
            assemble_config(flags);
            cmd_eval(pred_dir, gt_dir, out_file);
            return 0;
        }
        if (app.got_subcommand(gradcheck)) {
            const RunConfig cfg = assemble_config(flags);
            return cmd_gradcheck(cfg.seed, corrupt);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}

inline int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("votseg");
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace votseg::cli
