#include "htsrl/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <vector>

namespace htsrl::config {

namespace {

struct Entry {
    std::string value;
    int line = 0;
};

using Section = std::map<std::string, Entry>;

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

class Reader {
public:
    Reader(std::string source, std::map<std::string, Section> sections)
        : source_(std::move(source)), sections_(std::move(sections)) {}

    [[noreturn]] void fail(int line, const std::string& message) const {
        throw ConfigError(source_, line, message);
    }

    const Entry* find(const std::string& section, const std::string& key) {
        auto s = sections_.find(section);
        if (s == sections_.end()) return nullptr;
        auto it = s->second.find(key);
        if (it == s->second.end()) return nullptr;
        used_.insert(section + "." + key);
        return &it->second;
    }

    template <typename Int>
    void integer(const std::string& section, const std::string& key, Int& out) {
        const Entry* e = find(section, key);
        if (!e) return;
        Int value{};
        const char* end = e->value.data() + e->value.size();
        auto [ptr, ec] = std::from_chars(e->value.data(), end, value);
        if (ec != std::errc{} || ptr != end) {
            fail(e->line, section + "." + key + ": expected an integer, got '" + e->value + "'");
        }
        out = value;
    }

    void real(const std::string& section, const std::string& key, double& out) {
        const Entry* e = find(section, key);
        if (!e) return;
        double value = 0.0;
        const char* end = e->value.data() + e->value.size();
        auto [ptr, ec] = std::from_chars(e->value.data(), end, value);
        if (ec != std::errc{} || ptr != end || !std::isfinite(value)) {
            fail(e->line, section + "." + key + ": expected a finite number, got '" + e->value + "'");
        }
        out = value;
    }

    void boolean(const std::string& section, const std::string& key, bool& out) {
        const Entry* e = find(section, key);
        if (!e) return;
        if (e->value == "true") out = true;
        else if (e->value == "false") out = false;
        else fail(e->line, section + "." + key + ": expected true or false, got '" + e->value + "'");
    }

    void text(const std::string& section, const std::string& key, std::string& out) {
        if (const Entry* e = find(section, key)) out = e->value;
    }

    template <typename Enum>
    void choice(const std::string& section, const std::string& key,
                const std::vector<std::pair<std::string, Enum>>& options, Enum& out) {
        const Entry* e = find(section, key);
        if (!e) return;
        std::string allowed;
        for (const auto& [name, value] : options) {
            if (name == e->value) {
                out = value;
                return;
            }
            allowed += (allowed.empty() ? "" : "|") + name;
        }
        fail(e->line, section + "." + key + ": expected " + allowed + ", got '" + e->value + "'");
    }

    /// Rejects every key that no reader consumed.
    void reject_unused() const {
        for (const auto& [section, keys] : sections_) {
            for (const auto& [key, entry] : keys) {
                if (!used_.count(section + "." + key)) {
                    fail(entry.line, "unknown key '" + key + "' in [" + section + "]");
                }
            }
        }
    }

    /// Line of the first key whose name appears in `message`, else 0.
    int line_for(const std::string& message) const {
        int best = 0;
        std::size_t best_pos = std::string::npos;
        for (const auto& [section, keys] : sections_) {
            for (const auto& [key, entry] : keys) {
                std::string stem = key;
                if (stem.size() > 2 && (stem.ends_with("_x") || stem.ends_with("_y"))) {
                    stem.resize(stem.size() - 2);
                }
                const auto pos = message.find(stem);
                if (pos != std::string::npos && (best_pos == std::string::npos || pos < best_pos)) {
                    best_pos = pos;
                    best = entry.line;
                }
            }
        }
        return best;
    }

    const std::string& source() const { return source_; }

private:
    std::string source_;
    std::map<std::string, Section> sections_;
    std::set<std::string> used_;
};

const std::vector<std::pair<std::string, engine::EngineKind>> kKinds = {
    {"hts", engine::EngineKind::Hts},
    {"lockstep", engine::EngineKind::Lockstep},
    {"async", engine::EngineKind::Async},
};
const std::vector<std::pair<std::string, engine::LockstepBarrier>> kBarriers = {
    {"step", engine::LockstepBarrier::Step},
    {"interval", engine::LockstepBarrier::Interval},
};
const std::vector<std::pair<std::string, envs::StepTimeKind>> kStepTimes = {
    {"constant", envs::StepTimeKind::Constant},
    {"exponential", envs::StepTimeKind::Exponential},
    {"gamma", envs::StepTimeKind::Gamma},
};
const std::vector<std::pair<std::string, envs::ClockMode>> kClocks = {
    {"real", envs::ClockMode::Real},
    {"virtual", envs::ClockMode::Virtual},
};
const std::vector<std::pair<std::string, MetricsFormat>> kFormats = {
    {"csv", MetricsFormat::Csv},
    {"jsonl", MetricsFormat::Jsonl},
};

template <typename Enum>
std::string name_of(const std::vector<std::pair<std::string, Enum>>& options, Enum value) {
    for (const auto& [name, v] : options) {
        if (v == value) return name;
    }
    return "?";
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

ConfigError::ConfigError(std::string source, int line, const std::string& message)
    : UsageError(source + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": " + message),
      line_(line) {}

std::string to_string(engine::EngineKind kind) { return name_of(kKinds, kind); }
std::string to_string(MetricsFormat format) { return name_of(kFormats, format); }

void validate(const RunConfig& config) {
    try {
        config.engine.validate();
        if (config.queue_capacity < 1) {
            throw UsageError("engine.queue_capacity must be >= 1");
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const UsageError& e) {
        throw ConfigError("<config>", 0, e.what());
    }
}

RunConfig parse_config(std::string_view text, const std::string& source) {
    std::map<std::string, Section> sections;
    std::string current;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view raw = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;

        const auto comment = raw.find_first_of("#;");
        std::string_view line = trim(raw.substr(0, comment));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError(source, line_no, "malformed section header");
            }
            current = std::string(trim(line.substr(1, line.size() - 2)));
            static const std::set<std::string> known = {"engine", "learner", "env", "output"};
            if (!known.count(current)) {
                throw ConfigError(source, line_no, "unknown section [" + current + "]");
            }
            if (sections.count(current)) {
                throw ConfigError(source, line_no, "duplicate section [" + current + "]");
            }
            sections[current];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(source, line_no, "expected key = value");
        }
        if (current.empty()) {
            throw ConfigError(source, line_no, "key outside of any section");
        }
        std::string key(trim(line.substr(0, eq)));
        std::string value(trim(line.substr(eq + 1)));
        if (key.empty()) throw ConfigError(source, line_no, "empty key");
        auto& section = sections[current];
        if (section.count(key)) {
            throw ConfigError(source, line_no, "duplicate key '" + key + "' in [" + current + "]");
        }
        section[key] = Entry{value, line_no};
    }

    Reader r(source, std::move(sections));
    RunConfig out;
    auto& eng = out.engine;
    r.choice("engine", "kind", kKinds, eng.kind);
    r.integer("engine", "n_envs", eng.n_envs);
    r.integer("engine", "n_actors", eng.n_actors);
    r.integer("engine", "sync_interval", eng.sync_interval);
    r.integer("engine", "total_steps", eng.total_steps);
    r.integer("engine", "seed", eng.seed);
    r.integer("engine", "queue_capacity", out.queue_capacity);
    r.choice("engine", "lockstep_barrier", kBarriers, eng.lockstep_barrier);

    auto& hp = eng.hyperparams;
    r.real("learner", "discount", hp.discount);
    r.integer("learner", "nstep", hp.nstep);
    r.real("learner", "entropy_coef", hp.entropy_coef);
    r.real("learner", "value_coef", hp.value_coef);
    r.real("learner", "learning_rate", hp.learning_rate);
    r.real("learner", "compute_time", eng.learner_compute_time);

    std::string env_kind = "gridworld";
    r.text("env", "kind", env_kind);
    if (env_kind == "gridworld") {
        envs::GridWorldSpec g;
        r.integer("env", "width", g.width);
        r.integer("env", "height", g.height);
        r.integer("env", "start_x", g.start.x);
        r.integer("env", "start_y", g.start.y);
        r.integer("env", "goal_x", g.goal.x);
        r.integer("env", "goal_y", g.goal.y);
        r.integer("env", "horizon", g.horizon);
        r.real("env", "step_reward", g.step_reward);
        r.real("env", "goal_reward", g.goal_reward);
        eng.env = g;
    } else if (env_kind == "synthetic") {
        envs::SyntheticSpec s;
        r.choice("env", "step_time", kStepTimes, s.model.kind);
        r.real("env", "constant", s.model.constant);
        r.real("env", "rate", s.model.rate);
        r.real("env", "shape", s.model.shape);
        r.real("env", "actor_compute_time", s.model.actor_compute_time);
        r.integer("env", "horizon", s.horizon);
        r.choice("env", "clock", kClocks, s.clock);
        eng.env = s;
    } else {
        const Entry* e = r.find("env", "kind");
        r.fail(e ? e->line : 0, "env.kind: expected gridworld|synthetic, got '" + env_kind + "'");
    }

    r.text("output", "metrics", out.output.metrics);
    r.choice("output", "format", kFormats, out.output.format);
    r.boolean("output", "strip_timing", out.output.strip_timing);

    r.reject_unused();
    try {
        validate(out);
    } catch (const ConfigError& e) {
        std::string message = e.what();
        const std::string prefix = "<config>: ";
        if (message.rfind(prefix, 0) == 0) message = message.substr(prefix.size());
        throw ConfigError(source, r.line_for(message), message);
    }
    return out;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path, 0, "cannot open config file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path);
}

std::string serialize(const RunConfig& config) {
    const auto& eng = config.engine;
    const auto& hp = eng.hyperparams;
    std::ostringstream o;
    o << "[engine]\n"
      << "kind = " << name_of(kKinds, eng.kind) << "\n"
      << "n_envs = " << eng.n_envs << "\n"
      << "n_actors = " << eng.n_actors << "\n"
      << "sync_interval = " << eng.sync_interval << "\n"
      << "total_steps = " << eng.total_steps << "\n"
      << "seed = " << eng.seed << "\n"
      << "queue_capacity = " << config.queue_capacity << "\n"
      << "lockstep_barrier = " << name_of(kBarriers, eng.lockstep_barrier) << "\n"
      << "\n[learner]\n"
      << "discount = " << fmt(hp.discount) << "\n"
      << "nstep = " << hp.nstep << "\n"
      << "entropy_coef = " << fmt(hp.entropy_coef) << "\n"
      << "value_coef = " << fmt(hp.value_coef) << "\n"
      << "learning_rate = " << fmt(hp.learning_rate) << "\n"
      << "compute_time = " << fmt(eng.learner_compute_time) << "\n"
      << "\n[env]\n";
    if (const auto* g = std::get_if<envs::GridWorldSpec>(&eng.env)) {
        o << "kind = gridworld\n"
          << "width = " << g->width << "\n"
          << "height = " << g->height << "\n"
          << "start_x = " << g->start.x << "\n"
          << "start_y = " << g->start.y << "\n"
          << "goal_x = " << g->goal.x << "\n"
          << "goal_y = " << g->goal.y << "\n"
          << "horizon = " << g->horizon << "\n"
          << "step_reward = " << fmt(g->step_reward) << "\n"
          << "goal_reward = " << fmt(g->goal_reward) << "\n";
    } else {
        const auto& s = std::get<envs::SyntheticSpec>(eng.env);
        o << "kind = synthetic\n"
          << "step_time = " << name_of(kStepTimes, s.model.kind) << "\n"
          << "constant = " << fmt(s.model.constant) << "\n"
          << "rate = " << fmt(s.model.rate) << "\n"
          << "shape = " << fmt(s.model.shape) << "\n"
          << "actor_compute_time = " << fmt(s.model.actor_compute_time) << "\n"
          << "horizon = " << s.horizon << "\n"
          << "clock = " << name_of(kClocks, s.clock) << "\n";
    }
    o << "\n[output]\n"
      << "metrics = " << config.output.metrics << "\n"
      << "format = " << name_of(kFormats, config.output.format) << "\n"
      << "strip_timing = " << (config.output.strip_timing ? "true" : "false") << "\n";
    return o.str();
}

}  // namespace htsrl::config
