#include "coannot/time_util.hpp"

#include <cstdio>
#include <memory>

#include "coannot/error.hpp"

namespace coannot {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::InvalidClass: return "invalid_class";
    case ErrorCode::InsufficientData: return "insufficient_data";
    case ErrorCode::DegenerateDistribution: return "degenerate_distribution";
    case ErrorCode::Infeasible: return "infeasible";
    case ErrorCode::NotFound: return "not_found";
    case ErrorCode::Coverage: return "coverage";
    case ErrorCode::RoundClosed: return "round_closed";
    case ErrorCode::AlreadyClosed: return "already_closed";
    case ErrorCode::Corruption: return "corruption";
    case ErrorCode::Validation: return "validation";
    case ErrorCode::Io: return "io";
    case ErrorCode::Configuration: return "configuration";
    case ErrorCode::Unauthorized: return "unauthorized";
    case ErrorCode::Conflict: return "conflict";
  }
  return "unknown";
}

std::string format_timestamp(Timestamp t) {
  using namespace std::chrono;
  const auto day = floor<days>(t);
  const year_month_day ymd{day};
  const hh_mm_ss hms{t - day};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ",
                static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()),
                static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()),
                static_cast<int>(hms.subseconds().count()));
  return buf;
}

Timestamp parse_timestamp(const std::string& text) {
  using namespace std::chrono;
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0, ms = 0;
  if (std::sscanf(text.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d.%3dZ", &y, &mo, &d, &h,
                  &mi, &s, &ms) != 7) {
    throw Error(ErrorCode::Validation, "malformed timestamp: " + text);
  }
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)},
                           day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) throw Error(ErrorCode::Validation, "malformed timestamp: " + text);
  return sys_days{ymd} + hours{h} + minutes{mi} + seconds{s} + milliseconds{ms};
}

Timestamp system_now() {
  return std::chrono::floor<std::chrono::milliseconds>(
      std::chrono::system_clock::now());
}

Clock fixed_step_clock(Timestamp start, std::chrono::milliseconds step) {
  auto next = std::make_shared<Timestamp>(start);
  return [next, step] {
    const Timestamp now = *next;
    *next += step;
    return now;
  };
}

}  // namespace coannot
