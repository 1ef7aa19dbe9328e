#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace labharm {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define LABHARM_DEFINE_ERROR(Name)            \
    class Name : public Error {               \
    public:                                   \
        using Error::Error;                   \
    }

LABHARM_DEFINE_ERROR(ParseError);
LABHARM_DEFINE_ERROR(OverlapError);
LABHARM_DEFINE_ERROR(InvalidArgument);
LABHARM_DEFINE_ERROR(DuplicateIdError);
LABHARM_DEFINE_ERROR(UnknownField);
LABHARM_DEFINE_ERROR(UnknownRecord);
LABHARM_DEFINE_ERROR(DimensionMismatch);
LABHARM_DEFINE_ERROR(IndexMismatch);
LABHARM_DEFINE_ERROR(EmptyCandidateList);
LABHARM_DEFINE_ERROR(UnfittedSurrogate);
LABHARM_DEFINE_ERROR(InsufficientPool);
LABHARM_DEFINE_ERROR(LengthMismatch);
LABHARM_DEFINE_ERROR(EmptyDataset);
LABHARM_DEFINE_ERROR(DivergenceError);
LABHARM_DEFINE_ERROR(MissingGold);
LABHARM_DEFINE_ERROR(FileError);

#undef LABHARM_DEFINE_ERROR

/// Objective evaluation failed or returned a value outside [0, 1]; carries
/// the offending parameter vector.
class ObjectiveFailure : public Error {
public:
    ObjectiveFailure(const std::string& what, std::vector<double> theta) : Error(what), theta_(std::move(theta)) {}
    const std::vector<double>& theta() const { return theta_; }

private:
    std::vector<double> theta_;
};

}  // namespace labharm
