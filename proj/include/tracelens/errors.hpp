#pragma once

#include <stdexcept>
#include <string>

namespace tracelens {

/// Base for every error the library throws. `code()` is a short stable
/// kebab-case identifier suitable for diagnostics and tests.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

#define TRACELENS_DEFINE_ERROR(Name)                                     \
    class Name : public Error {                                          \
    public:                                                              \
        explicit Name(std::string code, const std::string& msg = {})     \
            : Error(std::move(code), msg.empty() ? #Name : msg) {}       \
    }

TRACELENS_DEFINE_ERROR(SchemaViolation);
TRACELENS_DEFINE_ERROR(IoError);
TRACELENS_DEFINE_ERROR(UnknownCandidate);
TRACELENS_DEFINE_ERROR(NoScoredCandidates);
TRACELENS_DEFINE_ERROR(InvalidConfig);
TRACELENS_DEFINE_ERROR(EmptySeed);
TRACELENS_DEFINE_ERROR(UnknownGroupKey);
TRACELENS_DEFINE_ERROR(InvalidJson);
TRACELENS_DEFINE_ERROR(InvalidLabel);
TRACELENS_DEFINE_ERROR(EmptyLabels);
TRACELENS_DEFINE_ERROR(KeyMismatch);
TRACELENS_DEFINE_ERROR(EmptyInput);
TRACELENS_DEFINE_ERROR(MissingSign);
TRACELENS_DEFINE_ERROR(Unavailable);
TRACELENS_DEFINE_ERROR(AuthError);
TRACELENS_DEFINE_ERROR(Misconfigured);
TRACELENS_DEFINE_ERROR(MissingContext);
TRACELENS_DEFINE_ERROR(MissingScore);
TRACELENS_DEFINE_ERROR(RewriteConflict);
TRACELENS_DEFINE_ERROR(MissingValue);
TRACELENS_DEFINE_ERROR(NonIntegralInt);
TRACELENS_DEFINE_ERROR(EmptySpace);
TRACELENS_DEFINE_ERROR(InvalidArgument);

#undef TRACELENS_DEFINE_ERROR

}  // namespace tracelens
