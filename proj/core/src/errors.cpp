#include "dagless/errors.hpp"

namespace dagless {
namespace {

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& item : items) {
    if (!out.empty()) out += ", ";
    out += item;
  }
  return out;
}

}  // namespace

Timeout::Timeout(std::vector<std::string> missing)
    : Error("timed out waiting for final results from: " + join(missing)), missing_(std::move(missing)) {}

Deadlock::Deadlock(std::vector<std::string> blocked_actors, std::vector<std::string> pending_fan_ins)
    : Error("deadlock: blocked actors [" + join(blocked_actors) + "]" +
            (pending_fan_ins.empty() ? std::string() : "; unsatisfied fan-ins [" + join(pending_fan_ins) + "]")),
      blocked_(std::move(blocked_actors)),
      pending_(std::move(pending_fan_ins)) {}

}  // namespace dagless
