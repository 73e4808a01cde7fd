/*
 * Copyright 2026 The lleb Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace lleb {

// Bad caller input: empty sequences, reserved tokens in data, bad configs.
class InvalidInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Broken internal invariant (shape mismatch, id out of range). Never expected
// on valid inputs.
class Defect : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// AUC requested on data holding a single class.
class UndefinedAuc : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Failure while decoding a snapshot. field() names the offending part of the
// file so the CLI can report it.
class SnapshotError : public std::runtime_error {
 public:
  SnapshotError(std::string field, const std::string& message)
      : std::runtime_error(message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Failure while reading a CSV log.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string file, std::size_t line, const std::string& message)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + message),
        file_(std::move(file)),
        line_(line) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

}  // namespace lleb
