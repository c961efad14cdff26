#pragma once

#include <cstddef>
#include <deque>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "newsclip/types.hpp"

namespace newsclip {

// Outcome of a batch of named checks. Failures are data, not exceptions.
struct ValidationReport {
  struct Check {
    std::string name;
    std::vector<SampleId> offending_ids;  // ascending, no duplicates
    bool passed() const { return offending_ids.empty(); }
  };

  // A deque so references returned by check() survive later insertions.
  std::deque<Check> checks;

  // Returns the named check, appending an empty one if absent.
  Check& check(const std::string& name);
  const Check* find(const std::string& name) const;
  std::size_t failure_count() const;
  bool ok() const { return failure_count() == 0; }

  // Sorts and de-duplicates every offending-id list.
  void normalize();

  nlohmann::ordered_json to_json() const;
};

}  // namespace newsclip
