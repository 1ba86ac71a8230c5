#ifndef CAVFB_ERROR_HPP
#define CAVFB_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace cavfb
{
// Failure categories. The CLI maps each one to a stable exit code.
enum class ErrorCategory
{
    invalid_argument,
    config,
    numeric_instability,
    fit_nonconvergence,
    unsupported,
    io,
};

constexpr std::string_view to_string(ErrorCategory c) noexcept
{
    switch (c) {
    case ErrorCategory::invalid_argument: return "invalid-argument";
    case ErrorCategory::config: return "config";
    case ErrorCategory::numeric_instability: return "numeric-instability";
    case ErrorCategory::fit_nonconvergence: return "fit-nonconvergence";
    case ErrorCategory::unsupported: return "unsupported";
    case ErrorCategory::io: return "io";
    }
    return "unknown";
}

class Error : public std::runtime_error
{
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category)
    {
    }

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory c, const std::string& what) { throw Error(c, what); }

inline void require(bool ok, const std::string& what)
{
    if (!ok) fail(ErrorCategory::invalid_argument, what);
}

}  // namespace cavfb

#endif  // CAVFB_ERROR_HPP
