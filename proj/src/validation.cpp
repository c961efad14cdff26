#include "newsclip/validation.hpp"

#include <algorithm>

namespace newsclip {

ValidationReport::Check& ValidationReport::check(const std::string& name) {
  for (auto& c : checks) {
    if (c.name == name) return c;
  }
  checks.push_back(Check{name, {}});
  return checks.back();
}

const ValidationReport::Check* ValidationReport::find(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

std::size_t ValidationReport::failure_count() const {
  std::size_t n = 0;
  for (const auto& c : checks) n += c.offending_ids.size();
  return n;
}

void ValidationReport::normalize() {
  for (auto& c : checks) {
    std::sort(c.offending_ids.begin(), c.offending_ids.end());
    c.offending_ids.erase(std::unique(c.offending_ids.begin(), c.offending_ids.end()),
                          c.offending_ids.end());
  }
}

nlohmann::ordered_json ValidationReport::to_json() const {
  nlohmann::ordered_json out;
  out["ok"] = ok();
  out["failure_count"] = failure_count();
  auto arr = nlohmann::ordered_json::array();
  for (const auto& c : checks) {
    nlohmann::ordered_json j;
    j["name"] = c.name;
    j["passed"] = c.passed();
    j["offending_ids"] = c.offending_ids;
    arr.push_back(std::move(j));
  }
  out["checks"] = std::move(arr);
  return out;
}

}  // namespace newsclip
