#pragma once

#include <string>
#include <utility>
#include <vector>

#include "hes/entropy.hpp"

namespace hes {

/// One reasoning trajectory as it arrives from generation logs.
struct SampleRecord {
  std::string sample_id;
  std::string query_id;
  SampleLabels labels;
  std::vector<TokenObservation> tokens;
  /// Unrecognized top-level fields as (key, raw JSON), carried through untouched.
  std::vector<std::pair<std::string, std::string>> extra_fields;
};

}  // namespace hes
