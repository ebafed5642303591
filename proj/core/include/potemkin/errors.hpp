#pragma once

#include <stdexcept>
#include <string>

namespace potemkin {

/// Base class for all toolkit errors. Input/validation problems map to CLI
/// exit code 1; BackendError subclasses map to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An instance id that does not exist in the instance space it was used with.
class UnknownInstanceError : public Error {
 public:
  using Error::Error;
};

/// An interpretation whose value vector does not match the instance space size.
class DimensionMismatchError : public Error {
 public:
  using Error::Error;
};

/// A concept whose human space contains a misinterpretation with an empty
/// disagreement set, so no set of instances can distinguish it from f*.
class UnsolvableConceptError : public Error {
 public:
  using Error::Error;
};

/// A rate was requested over zero valid trials; callers must report "no data"
/// instead of fabricating 0.
class EmptyTallyError : public Error {
 public:
  using Error::Error;
};

/// A document failed schema validation; the message carries the field path.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// A record references an id that does not resolve within its dataset.
class DanglingReferenceError : public Error {
 public:
  using Error::Error;
};

/// Grader kind or configuration incompatible with the item it was asked to grade.
class GraderMismatchError : public Error {
 public:
  using Error::Error;
};

/// An annotation file has no label for an (item, model) pair. Distinct from an
/// excluded response: it signals an incomplete label file.
class MissingAnnotationError : public Error {
 public:
  using Error::Error;
};

/// A concept lacks the items a pipeline needs (e.g. too few classify items for
/// the requested keystone expansion).
class InsufficientItemsError : public Error {
 public:
  using Error::Error;
};

/// A run directory does not contain a run report.
class MissingReportError : public Error {
 public:
  using Error::Error;
};

/// Base for model-backend failures (CLI exit code 2).
class BackendError : public Error {
 public:
  using Error::Error;
};

/// Transient transport failure; retried internally with backoff.
class TransportError : public BackendError {
 public:
  using BackendError::BackendError;
};

/// Backend could not serve the request after all retries.
class BackendUnavailableError : public BackendError {
 public:
  using BackendError::BackendError;
};

/// Credential rejected; never retried.
class AuthFailureError : public BackendError {
 public:
  using BackendError::BackendError;
};

/// The configured per-run budget of backend calls was exhausted.
class BudgetExceededError : public BackendError {
 public:
  using BackendError::BackendError;
};

/// Cache-only run hit a request that is not in the transcript store.
class CacheMissError : public BackendError {
 public:
  using BackendError::BackendError;
};

}  // namespace potemkin
