#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "votseg/pipeline.hpp"
#include "votseg/proposals.hpp"

namespace votseg {

/// Every run-tunable knob, flat key=value style. Precedence when assembling a
/// run: defaults, then config file, then TM_* environment variables, then
/// command-line flags.
struct RunConfig {
    std::uint64_t seed = 0;
    int jobs = 1;
    TrackerConfig tracker;

    double train_gamma = kDefaultGamma;
    double train_lr_actor = kDefaultActorLr;
    double train_lr_critic = kDefaultCriticLr;
    double train_lr_decay = kLrDecayFactor;
    int train_lr_decay_every = kLrDecayEvery;
    int train_clip_length = 10;
    int train_batch_size = 20;
    std::int64_t train_iterations = 50000;

    double detector_box_jitter = 0.03;
    int detector_morph_radius = 1;
    double detector_dropout_prob = 0.0;
    double detector_confidence_scale = 0.5;
    int detector_proposal_cap = 20;

    std::string synth_preset = "basic";  // basic | drift
    int synth_frames = 40;
    int synth_objects = 2;
};

namespace detail {

inline const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = {
        "seed",
        "jobs",
        "tracker.alpha_first",
        "tracker.beta_first",
        "tracker.alpha",
        "tracker.beta",
        "tracker.redetect_after",
        "tracker.ratio_big",
        "tracker.ratio_mid",
        "tracker.ratio_small",
        "tracker.displacement_threshold",
        "tracker.proposal_cap",
        "tracker.feature_grid",
        "tracker.keep_confidence_decay",
        "train.gamma",
        "train.lr_actor",
        "train.lr_critic",
        "train.lr_decay",
        "train.lr_decay_every",
        "train.clip_length",
        "train.batch_size",
        "train.iterations",
        "detector.box_jitter",
        "detector.morph_radius",
        "detector.dropout_prob",
        "detector.confidence_scale",
        "detector.proposal_cap",
        "synth.preset",
        "synth.frames",
        "synth.objects",
    };
    return keys;
}

inline double parse_double(const std::string& key, const std::string& value) {
    std::size_t idx = 0;
    double v = 0;
    try {
        v = std::stod(value, &idx);
    } catch (const std::exception&) {
        idx = 0;
    }
    if (idx != value.size() || value.empty())
        throw std::invalid_argument("config key '" + key + "': bad number '" + value + "'");
    return v;
}

inline long long parse_int(const std::string& key, const std::string& value) {
    std::size_t idx = 0;
    long long v = 0;
    try {
        v = std::stoll(value, &idx);
    } catch (const std::exception&) {
        idx = 0;
    }
    if (idx != value.size() || value.empty())
        throw std::invalid_argument("config key '" + key + "': bad integer '" + value + "'");
    return v;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& value) {
    std::size_t idx = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(value, &idx);
    } catch (const std::exception&) {
        idx = 0;
    }
    if (idx != value.size() || value.empty())
        throw std::invalid_argument("config key '" + key + "': bad unsigned integer '" + value + "'");
    return v;
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace detail

inline void set_config_value(RunConfig& c, const std::string& key, const std::string& value) {
    using detail::parse_double;
    using detail::parse_int;
    using detail::parse_uint;
    if (key == "seed") c.seed = parse_uint(key, value);
    else if (key == "jobs") c.jobs = static_cast<int>(parse_int(key, value));
    else if (key == "tracker.alpha_first") c.tracker.alpha_first = parse_double(key, value);
    else if (key == "tracker.beta_first") c.tracker.beta_first = parse_double(key, value);
    else if (key == "tracker.alpha") c.tracker.alpha = parse_double(key, value);
    else if (key == "tracker.beta") c.tracker.beta = parse_double(key, value);
    else if (key == "tracker.redetect_after") c.tracker.redetect_after = static_cast<int>(parse_int(key, value));
    else if (key == "tracker.ratio_big") c.tracker.ratio_big = parse_double(key, value);
    else if (key == "tracker.ratio_mid") c.tracker.ratio_mid = parse_double(key, value);
    else if (key == "tracker.ratio_small") c.tracker.ratio_small = parse_double(key, value);
    else if (key == "tracker.displacement_threshold")
        c.tracker.displacement_threshold = parse_double(key, value);
    else if (key == "tracker.proposal_cap") c.tracker.proposal_cap = static_cast<int>(parse_int(key, value));
    else if (key == "tracker.feature_grid") c.tracker.feature_grid = static_cast<int>(parse_int(key, value));
    else if (key == "tracker.keep_confidence_decay")
        c.tracker.keep_confidence_decay = parse_double(key, value);
    else if (key == "train.gamma") c.train_gamma = parse_double(key, value);
    else if (key == "train.lr_actor") c.train_lr_actor = parse_double(key, value);
    else if (key == "train.lr_critic") c.train_lr_critic = parse_double(key, value);
    else if (key == "train.lr_decay") c.train_lr_decay = parse_double(key, value);
    else if (key == "train.lr_decay_every") c.train_lr_decay_every = static_cast<int>(parse_int(key, value));
    else if (key == "train.clip_length") c.train_clip_length = static_cast<int>(parse_int(key, value));
    else if (key == "train.batch_size") c.train_batch_size = static_cast<int>(parse_int(key, value));
    else if (key == "train.iterations") c.train_iterations = parse_int(key, value);
    else if (key == "detector.box_jitter") c.detector_box_jitter = parse_double(key, value);
    else if (key == "detector.morph_radius") c.detector_morph_radius = static_cast<int>(parse_int(key, value));
    else if (key == "detector.dropout_prob") c.detector_dropout_prob = parse_double(key, value);
    else if (key == "detector.confidence_scale") c.detector_confidence_scale = parse_double(key, value);
    else if (key == "detector.proposal_cap") c.detector_proposal_cap = static_cast<int>(parse_int(key, value));
    else if (key == "synth.preset") c.synth_preset = value;
    else if (key == "synth.frames") c.synth_frames = static_cast<int>(parse_int(key, value));
    else if (key == "synth.objects") c.synth_objects = static_cast<int>(parse_int(key, value));
    else throw std::invalid_argument("unknown config key '" + key + "'");
}

inline std::string get_config_value(const RunConfig& c, const std::string& key) {
    using detail::format_double;
    if (key == "seed") return std::to_string(c.seed);
    if (key == "jobs") return std::to_string(c.jobs);
    if (key == "tracker.alpha_first") return format_double(c.tracker.alpha_first);
    if (key == "tracker.beta_first") return format_double(c.tracker.beta_first);
    if (key == "tracker.alpha") return format_double(c.tracker.alpha);
    if (key == "tracker.beta") return format_double(c.tracker.beta);
    if (key == "tracker.redetect_after") return std::to_string(c.tracker.redetect_after);
    if (key == "tracker.ratio_big") return format_double(c.tracker.ratio_big);
    if (key == "tracker.ratio_mid") return format_double(c.tracker.ratio_mid);
    if (key == "tracker.ratio_small") return format_double(c.tracker.ratio_small);
    if (key == "tracker.displacement_threshold") return format_double(c.tracker.displacement_threshold);
    if (key == "tracker.proposal_cap") return std::to_string(c.tracker.proposal_cap);
    if (key == "tracker.feature_grid") return std::to_string(c.tracker.feature_grid);
    if (key == "tracker.keep_confidence_decay") return format_double(c.tracker.keep_confidence_decay);
    if (key == "train.gamma") return format_double(c.train_gamma);
    if (key == "train.lr_actor") return format_double(c.train_lr_actor);
    if (key == "train.lr_critic") return format_double(c.train_lr_critic);
    if (key == "train.lr_decay") return format_double(c.train_lr_decay);
    if (key == "train.lr_decay_every") return std::to_string(c.train_lr_decay_every);
    if (key == "train.clip_length") return std::to_string(c.train_clip_length);
    if (key == "train.batch_size") return std::to_string(c.train_batch_size);
    if (key == "train.iterations") return std::to_string(c.train_iterations);
    if (key == "detector.box_jitter") return format_double(c.detector_box_jitter);
    if (key == "detector.morph_radius") return std::to_string(c.detector_morph_radius);
    if (key == "detector.dropout_prob") return format_double(c.detector_dropout_prob);
    if (key == "detector.confidence_scale") return format_double(c.detector_confidence_scale);
    if (key == "detector.proposal_cap") return std::to_string(c.detector_proposal_cap);
    if (key == "synth.preset") return c.synth_preset;
    if (key == "synth.frames") return std::to_string(c.synth_frames);
    if (key == "synth.objects") return std::to_string(c.synth_objects);
    throw std::invalid_argument("unknown config key '" + key + "'");
}

/// Parses `key=value` lines; blank lines and lines starting with '#' are
/// skipped.
inline void parse_config_text(RunConfig& c, const std::string& text, const std::string& source) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(source + " line " + std::to_string(line_no) + ": expected key=value");
        set_config_value(c, detail::trim(t.substr(0, eq)), detail::trim(t.substr(eq + 1)));
    }
}

inline void load_config_file(RunConfig& c, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    parse_config_text(c, buf.str(), path);
}

/// Environment overrides: key `tracker.alpha` reads TM_TRACKER_ALPHA.
inline void apply_env_overrides(RunConfig& c) {
    for (const std::string& key : detail::config_keys()) {
        std::string env = "TM_";
        for (char ch : key) env += ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
        if (const char* v = std::getenv(env.c_str())) set_config_value(c, key, v);
    }
}

inline std::string dump_config(const RunConfig& c) {
    std::string out;
    for (const std::string& key : detail::config_keys()) {
        out += key;
        out += '=';
        out += get_config_value(c, key);
        out += '\n';
    }
    return out;
}

inline void validate_config(const RunConfig& c) {
    check_tracker_config(c.tracker);
    if (c.jobs < 1) throw std::invalid_argument("config key 'jobs': must be >= 1");
    if (!(c.train_gamma >= 0 && c.train_gamma <= 1))
        throw std::invalid_argument("config key 'train.gamma': outside [0,1]");
    if (c.train_lr_actor <= 0 || c.train_lr_critic <= 0)
        throw std::invalid_argument("config key 'train.lr_actor'/'train.lr_critic': must be positive");
    if (c.train_lr_decay <= 0 || c.train_lr_decay > 1)
        throw std::invalid_argument("config key 'train.lr_decay': outside (0,1]");
    if (c.train_lr_decay_every < 1) throw std::invalid_argument("config key 'train.lr_decay_every': must be >= 1");
    if (c.train_clip_length < 2) throw std::invalid_argument("config key 'train.clip_length': must be >= 2");
    if (c.train_batch_size < 1) throw std::invalid_argument("config key 'train.batch_size': must be >= 1");
    if (c.train_iterations < 0) throw std::invalid_argument("config key 'train.iterations': must be >= 0");
    if (c.detector_box_jitter < 0) throw std::invalid_argument("config key 'detector.box_jitter': negative");
    if (c.detector_morph_radius < 0) throw std::invalid_argument("config key 'detector.morph_radius': negative");
    if (!(c.detector_dropout_prob >= 0 && c.detector_dropout_prob <= 1))
        throw std::invalid_argument("config key 'detector.dropout_prob': outside [0,1]");
    if (c.detector_confidence_scale < 0)
        throw std::invalid_argument("config key 'detector.confidence_scale': negative");
    if (c.detector_proposal_cap < 1) throw std::invalid_argument("config key 'detector.proposal_cap': must be >= 1");
    if (c.synth_preset != "basic" && c.synth_preset != "drift")
        throw std::invalid_argument("config key 'synth.preset': expected basic or drift");
    if (c.synth_frames < 2) throw std::invalid_argument("config key 'synth.frames': must be >= 2");
    if (c.synth_objects < 1 || c.synth_objects > 4)
        throw std::invalid_argument("config key 'synth.objects': outside 1..4");
}

inline DetectorScript detector_script_from_config(const RunConfig& c, std::uint64_t seed_salt = 0xDE7EC7u) {
    DetectorScript s;
    s.box_jitter = c.detector_box_jitter;
    s.morph_radius = c.detector_morph_radius;
    s.dropout_prob = c.detector_dropout_prob;
    s.distractor_confidence_scale = c.detector_confidence_scale;
    s.proposal_cap = c.detector_proposal_cap;
    s.seed = mix_seed(c.seed, seed_salt);
    return s;
}

inline TrainOptions train_options_from_config(const RunConfig& c) {
    TrainOptions opt;
    opt.batch_size = c.train_batch_size;
    opt.budget = c.train_iterations;
    opt.gamma = c.train_gamma;
    opt.seed = c.seed;
    return opt;
}

}  // namespace votseg
