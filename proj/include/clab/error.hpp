#ifndef CLAB_ERROR_HPP
#define CLAB_ERROR_HPP

#include <stdexcept>
#include <string>

namespace clab {

// Error with a stable machine-readable code ("invalid-weight", "bad-annulus", ...)
// next to the human message. The CLI maps codes to exit codes.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

    const std::string& code() const { return code_; }

private:
    std::string code_;
};

} // namespace clab

#endif
