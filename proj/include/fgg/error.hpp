#pragma once

#include <stdexcept>
#include <string>

namespace fgg {

enum class errc {
  arity_mismatch,
  label_mismatch,
  unknown_label,
  duplicate_id,
  nonterminal_edge_present,
  assignment_space_too_large,
  external_signature_mismatch,
  start_has_nonempty_type,
  label_class,
  invalid_derivation,
  recursive_input,
  blowup_limit_exceeded,
  missing_child_table,
  non_convergence,
  singular_linear_system,
  no_derivation,
  not_converged,
  invalid_correspondence,
  incompatible_label_spaces,
  invalid_decomposition,
  reentrant_input,
  table_too_large,
  not_convertible,
  invalid_spn,
  parse_error,
  internal,
};

inline const char* errc_name(errc c) {
  switch (c) {
    case errc::arity_mismatch: return "ArityMismatch";
    case errc::label_mismatch: return "LabelMismatch";
    case errc::unknown_label: return "UnknownLabel";
    case errc::duplicate_id: return "DuplicateId";
    case errc::nonterminal_edge_present: return "NonterminalEdgePresent";
    case errc::assignment_space_too_large: return "AssignmentSpaceTooLarge";
    case errc::external_signature_mismatch: return "ExternalSignatureMismatch";
    case errc::start_has_nonempty_type: return "StartHasNonEmptyType";
    case errc::label_class: return "LabelClass";
    case errc::invalid_derivation: return "InvalidDerivation";
    case errc::recursive_input: return "RecursiveInput";
    case errc::blowup_limit_exceeded: return "BlowupLimitExceeded";
    case errc::missing_child_table: return "MissingChildTable";
    case errc::non_convergence: return "NonConvergence";
    case errc::singular_linear_system: return "SingularLinearSystem";
    case errc::no_derivation: return "NoDerivation";
    case errc::not_converged: return "NotConverged";
    case errc::invalid_correspondence: return "InvalidCorrespondence";
    case errc::incompatible_label_spaces: return "IncompatibleLabelSpaces";
    case errc::invalid_decomposition: return "InvalidDecomposition";
    case errc::reentrant_input: return "ReentrantInput";
    case errc::table_too_large: return "TableTooLarge";
    case errc::not_convertible: return "NotConvertible";
    case errc::invalid_spn: return "InvalidSPN";
    case errc::parse_error: return "ParseError";
    case errc::internal: return "InternalError";
  }
  return "Error";
}

/// Library-wide exception type; `code()` identifies the failure class.
class error : public std::runtime_error {
 public:
  error(errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  errc code() const { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& message) {
  throw error(code, message);
}

}  // namespace fgg
