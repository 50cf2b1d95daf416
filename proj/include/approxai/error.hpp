#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace approxai {

enum class Errc {
  non_finite,
  bad_length,
  schedule_mismatch,
  length_mismatch,
  empty_matrix,
  shape_mismatch,
  non_finite_weights,
  parse_error,
  schema_version,
  degenerate_input,
  index_out_of_bounds,
  singular_matrix,
  duplicate_nodes,
  out_of_range,
  feature_in_subset,
  too_many_features,
  infeasible,
  empty_samples,
  invalid_argument,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::non_finite: return "NonFinite";
    case Errc::bad_length: return "BadLength";
    case Errc::schedule_mismatch: return "ScheduleMismatch";
    case Errc::length_mismatch: return "LengthMismatch";
    case Errc::empty_matrix: return "EmptyMatrix";
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::non_finite_weights: return "NonFiniteWeights";
    case Errc::parse_error: return "ParseError";
    case Errc::schema_version: return "SchemaVersionError";
    case Errc::degenerate_input: return "DegenerateInput";
    case Errc::index_out_of_bounds: return "IndexOutOfBounds";
    case Errc::singular_matrix: return "SingularMatrix";
    case Errc::duplicate_nodes: return "DuplicateNodes";
    case Errc::out_of_range: return "OutOfRange";
    case Errc::feature_in_subset: return "FeatureInSubset";
    case Errc::too_many_features: return "TooManyFeatures";
    case Errc::infeasible: return "Infeasible";
    case Errc::empty_samples: return "EmptySamples";
    case Errc::invalid_argument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// front ends can map them to exit statuses without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  [[nodiscard]] Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace approxai
