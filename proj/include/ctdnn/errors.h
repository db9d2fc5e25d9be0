// include/ctdnn/errors.h

// Copyright 2026  The ctdnn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef CTDNN_ERRORS_H_
#define CTDNN_ERRORS_H_

#include <stdexcept>
#include <string>

namespace ctdnn {

/// Root of every error the library throws.  Subclasses exist so callers (and
/// tests) can tell the failure classes apart; the message always carries the
/// offending shapes, indices or offsets.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define CTDNN_DEFINE_ERROR(Name)         \
  class Name : public Error {            \
   public:                               \
    using Error::Error;                  \
  }

CTDNN_DEFINE_ERROR(ShapeError);
CTDNN_DEFINE_ERROR(EmptyInputError);
CTDNN_DEFINE_ERROR(EvaluationError);
CTDNN_DEFINE_ERROR(SequenceTooShortError);
CTDNN_DEFINE_ERROR(TopologyError);
CTDNN_DEFINE_ERROR(InsufficientStatisticsError);
CTDNN_DEFINE_ERROR(LabelError);
CTDNN_DEFINE_ERROR(SemanticError);
CTDNN_DEFINE_ERROR(CacheError);
CTDNN_DEFINE_ERROR(DivergenceError);
CTDNN_DEFINE_ERROR(RankError);
CTDNN_DEFINE_ERROR(ConditioningError);
CTDNN_DEFINE_ERROR(UndefinedScoreError);
CTDNN_DEFINE_ERROR(LookupError);
CTDNN_DEFINE_ERROR(UnsupportedFormatError);
CTDNN_DEFINE_ERROR(ValidationError);
CTDNN_DEFINE_ERROR(IoError);

#undef CTDNN_DEFINE_ERROR

/// Syntax error in the architecture DSL; `position` is a 0-based character
/// offset into the text that was parsed.
class ParseError : public Error {
 public:
  ParseError(std::size_t position, const std::string &expected)
      : Error("parse error at position " + std::to_string(position) +
              ": expected " + expected),
        position_(position),
        expected_(expected) {}
  std::size_t position() const { return position_; }
  const std::string &expected() const { return expected_; }

 private:
  std::size_t position_;
  std::string expected_;
};

/// Malformed binary file; `offset` is the byte offset where reading failed.
class FormatError : public Error {
 public:
  FormatError(std::size_t offset, const std::string &what)
      : Error("format error at byte offset " + std::to_string(offset) + ": " +
              what),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace ctdnn

#endif  // CTDNN_ERRORS_H_
