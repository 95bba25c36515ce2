#pragma once

#include <stdexcept>
#include <string>

namespace groundwork {

/// Base for every error raised by this library. Callers that only need to
/// distinguish "our" failures from programming errors catch this.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace groundwork
