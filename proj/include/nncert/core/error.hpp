// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nncert {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape contract of a primitive was not met by its parent shapes.
class TypingError : public Error {
 public:
  TypingError(std::size_t parent_index, std::string expected, std::string actual)
      : Error("parent " + std::to_string(parent_index) + ": expected " + expected + ", got " + actual),
        parent_index_(parent_index),
        expected_(std::move(expected)),
        actual_(std::move(actual)) {}

  explicit TypingError(const std::string& what) : Error(what) {}

  std::size_t parent_index() const { return parent_index_; }
  const std::string& expected() const { return expected_; }
  const std::string& actual() const { return actual_; }

 private:
  std::size_t parent_index_ = 0;
  std::string expected_;
  std::string actual_;
};

enum class ValidationRule { ssa_order, arity, shape, param_resolution, output };

inline const char* to_string(ValidationRule r) {
  switch (r) {
    case ValidationRule::ssa_order: return "SSA-order";
    case ValidationRule::arity: return "arity";
    case ValidationRule::shape: return "shape";
    case ValidationRule::param_resolution: return "param-resolution";
    case ValidationRule::output: return "output";
  }
  return "?";
}

class ValidationError : public Error {
 public:
  ValidationError(std::size_t node, ValidationRule rule, const std::string& detail)
      : Error(std::string(to_string(rule)) + " at node " + std::to_string(node) + ": " + detail),
        node_(node),
        rule_(rule) {}

  std::size_t node() const { return node_; }
  ValidationRule rule() const { return rule_; }

 private:
  std::size_t node_;
  ValidationRule rule_;
};

/// Raised by a scalar domain when a value leaves its declared value set
/// (e.g. overflow in the finite-only binary32 model).
class DomainError : public Error {
 public:
  using Error::Error;
};

class EvalError : public Error {
 public:
  EvalError(std::size_t node, const std::string& cause)
      : Error("node " + std::to_string(node) + ": " + cause), node_(node), cause_(cause) {}

  std::size_t node() const { return node_; }
  const std::string& cause() const { return cause_; }

 private:
  std::size_t node_;
  std::string cause_;
};

class PhaseError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::string path, const std::string& what)
      : Error(path + ": " + what), path_(std::move(path)) {}

  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

}  // namespace nncert
