// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace twin {

// Base of every error raised by the library. code() is a stable, greppable
// identifier (e.g. "UnknownParameter"); what() carries the human detail.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& detail)
      : std::runtime_error(code + ": " + detail), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

#define TWIN_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                     \
   public:                                                        \
    explicit Name(const std::string& detail) : Error(#Name, detail) {} \
  }

// catalog / store
TWIN_DEFINE_ERROR(UnknownParameter);
TWIN_DEFINE_ERROR(InvalidRange);
TWIN_DEFINE_ERROR(EmptyRange);
TWIN_DEFINE_ERROR(InsufficientHistory);
TWIN_DEFINE_ERROR(ParseError);

// forecasting
TWIN_DEFINE_ERROR(ShapeMismatch);
TWIN_DEFINE_ERROR(DegenerateDelta);
TWIN_DEFINE_ERROR(EmptyDataset);
TWIN_DEFINE_ERROR(NonFiniteLoss);
TWIN_DEFINE_ERROR(InsufficientData);
TWIN_DEFINE_ERROR(TaskMismatch);
TWIN_DEFINE_ERROR(BudgetExhausted);

// weather
TWIN_DEFINE_ERROR(NetworkError);
TWIN_DEFINE_ERROR(ShapeError);
TWIN_DEFINE_ERROR(OutOfDomain);

// server
TWIN_DEFINE_ERROR(Unauthorized);
TWIN_DEFINE_ERROR(MalformedPayload);
TWIN_DEFINE_ERROR(FutureRange);
TWIN_DEFINE_ERROR(InvalidTime);
TWIN_DEFINE_ERROR(UnknownModel);
TWIN_DEFINE_ERROR(NoFieldAvailable);
TWIN_DEFINE_ERROR(SubscriberOverflow);

// configuration
TWIN_DEFINE_ERROR(ConfigError);

#undef TWIN_DEFINE_ERROR

}  // namespace twin
