#include "htsrl/metrics_sink.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>

#include <json.hpp>

namespace htsrl::metrics {

namespace {

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string csv_header(bool strip_timing) {
    return strip_timing ? "epoch,env_steps,avg_episode_return,policy_lag"
                        : "epoch,env_steps,wall_time,sps,avg_episode_return,policy_lag";
}

MetricsSink::MetricsSink(std::ostream& out, config::MetricsFormat format, bool strip_timing)
    : out_(&out), format_(format), strip_(strip_timing) {
    if (format_ == config::MetricsFormat::Csv) *out_ << csv_header(strip_) << '\n';
}

std::unique_ptr<MetricsSink> MetricsSink::open(const config::OutputConfig& output) {
    if (output.metrics.empty() || output.metrics == "-") {
        return std::make_unique<MetricsSink>(std::cout, output.format, output.strip_timing);
    }
    auto file = std::make_unique<std::ofstream>(output.metrics, std::ios::binary | std::ios::trunc);
    if (!*file) {
        throw config::ConfigError(output.metrics, 0, "cannot open metrics file for writing");
    }
    auto sink = std::make_unique<MetricsSink>(*file, output.format, output.strip_timing);
    sink->file_ = std::move(file);
    return sink;
}

void MetricsSink::write(const engine::MetricsRecord& r) {
    if (format_ == config::MetricsFormat::Csv) {
        *out_ << r.epoch << ',' << r.env_steps << ',';
        if (!strip_) *out_ << num(r.wall_time) << ',' << num(r.sps) << ',';
        *out_ << num(r.avg_episode_return) << ',' << r.policy_lag << '\n';
    } else {
        nlohmann::ordered_json j;
        j["epoch"] = r.epoch;
        j["env_steps"] = r.env_steps;
        if (!strip_) {
            j["wall_time"] = r.wall_time;
            j["sps"] = r.sps;
        }
        if (std::isnan(r.avg_episode_return)) {
            j["avg_episode_return"] = nullptr;
        } else {
            j["avg_episode_return"] = r.avg_episode_return;
        }
        j["policy_lag"] = r.policy_lag;
        *out_ << j.dump() << '\n';
    }
    out_->flush();
    ++rows_;
}

}  // namespace htsrl::metrics
