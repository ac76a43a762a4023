#pragma once

#include <fstream>
#include <memory>
#include <ostream>
#include <string>

#include "htsrl/config.hpp"
#include "htsrl/engine.hpp"

namespace htsrl::metrics {

/// Streams MetricsRecords as CSV or JSON lines.
///
/// CSV columns, in order: epoch, env_steps, wall_time, sps,
/// avg_episode_return, policy_lag. With strip_timing the wall_time and sps
/// columns (or JSON fields) are omitted. A missing episode average is written
/// as "nan" in CSV and null in JSON.
class MetricsSink {
public:
    MetricsSink(std::ostream& out, config::MetricsFormat format, bool strip_timing);

    /// Opens `path`, or uses standard output when empty or "-".
    static std::unique_ptr<MetricsSink> open(const config::OutputConfig& output);

    void write(const engine::MetricsRecord& record);
    std::size_t rows() const { return rows_; }

private:
    std::unique_ptr<std::ofstream> file_;
    std::ostream* out_;
    config::MetricsFormat format_;
    bool strip_;
    std::size_t rows_ = 0;
};

std::string csv_header(bool strip_timing);

}  // namespace htsrl::metrics
