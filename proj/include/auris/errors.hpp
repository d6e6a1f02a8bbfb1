// Copyright 2026 The Auris Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef AURIS_ERRORS_HPP
#define AURIS_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace auris {

// Base class of everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define AURIS_DEFINE_ERROR(NAME)            \
  class NAME : public Error {               \
   public:                                  \
    using Error::Error;                     \
  }

// I/O and file-format failures.
AURIS_DEFINE_ERROR(IoError);
AURIS_DEFINE_ERROR(FormatError);
AURIS_DEFINE_ERROR(UnsupportedError);
AURIS_DEFINE_ERROR(SchemaError);
AURIS_DEFINE_ERROR(CorruptModelError);
AURIS_DEFINE_ERROR(VersionError);

// Bad arguments or configuration.
AURIS_DEFINE_ERROR(ParamError);
AURIS_DEFINE_ERROR(ConfigError);
AURIS_DEFINE_ERROR(ShapeError);
AURIS_DEFINE_ERROR(LabelError);

// Data that violates an operation's preconditions.
AURIS_DEFINE_ERROR(DataError);
AURIS_DEFINE_ERROR(DegenerateSignalError);
AURIS_DEFINE_ERROR(DegenerateError);
AURIS_DEFINE_ERROR(EmptyError);
AURIS_DEFINE_ERROR(EmptyFeatureError);
AURIS_DEFINE_ERROR(InputTooShortError);

// Training blew up.
AURIS_DEFINE_ERROR(DivergenceError);

#undef AURIS_DEFINE_ERROR

}  // namespace auris

#endif  // AURIS_ERRORS_HPP
