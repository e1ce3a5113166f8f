#pragma once

#include <chrono>
#include <functional>
#include <string>

namespace coannot {

/// UTC instant with millisecond precision.
using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

std::string format_timestamp(Timestamp t);  // 2026-01-02T03:04:05.678Z
Timestamp parse_timestamp(const std::string& text);

using Clock = std::function<Timestamp()>;
Timestamp system_now();

/// Clock that starts at `start` and advances by `step` on every call.
Clock fixed_step_clock(Timestamp start, std::chrono::milliseconds step);

}  // namespace coannot
