// Copyright 2026 The sphiou Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace sphiou {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A SphericalRect (or other parameter set) violates its range invariants.
class InvalidRect : public Error {
 public:
  using Error::Error;
};

/// Two adjacent boundary planes are parallel, so the corner is undefined.
class DegenerateRect : public Error {
 public:
  using Error::Error;
};

class MalformedPolygon : public Error {
 public:
  using Error::Error;
};

/// Monte Carlo draw produced no sample inside either box.
class ZeroUnion : public Error {
 public:
  using Error::Error;
};

/// A tangent-plane sample sits at or beyond 90 degrees from the tangent point.
class ProjectionOverflow : public Error {
 public:
  using Error::Error;
};

/// Focal loss called on a ground-truth tensor without any positive cell.
class EmptyGt : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class RangeError : public Error {
 public:
  RangeError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace sphiou
