#pragma once

#include <string_view>

namespace optstop {

enum class Status {
  kPass,
  kFail,
  /// Checked only in the form that survives on a finite probability space.
  kDegenerate,
  /// A check whose precondition does not hold for the supplied input.
  kHypothesisUnmet,
};

constexpr std::string_view to_string(Status status) {
  switch (status) {
    case Status::kPass: return "pass";
    case Status::kFail: return "fail";
    case Status::kDegenerate: return "degenerate";
    case Status::kHypothesisUnmet: return "hypothesis_unmet";
  }
  return "unknown";
}

constexpr bool is_success(Status status) {
  return status == Status::kPass || status == Status::kDegenerate;
}

}  // namespace optstop
