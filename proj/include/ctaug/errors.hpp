#pragma once

#include <stdexcept>
#include <string>

namespace ctaug {

// Error categories map one-to-one onto CLI exit codes.
struct ConfigError : std::runtime_error {  // exit 1
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {  // exit 2
  using std::runtime_error::runtime_error;
};

struct TrainingError : std::runtime_error {  // exit 3
  using std::runtime_error::runtime_error;
};

}  // namespace ctaug
