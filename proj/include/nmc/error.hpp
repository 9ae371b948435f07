#pragma once

#include <stdexcept>
#include <string>

namespace nmc {

/// Malformed or unsupported mesh input (bad indices, parse failures, degenerate geometry).
class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed compressed container or entropy-coded stream.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure during INR fitting or evaluation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failure of one encode/decode stage; `stage()` names it.
class PipelineError : public std::runtime_error {
 public:
  PipelineError(std::string stage, const std::string& what)
      : std::runtime_error("[" + stage + "] " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace nmc
