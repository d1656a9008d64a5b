#pragma once

#include <stdexcept>
#include <string>

namespace vpursuit {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A feature point projected with non-positive depth; vision of the target is lost.
class FeatureBehindCamera : public Error {
public:
    using Error::Error;
};

/// Image Jacobian lost rank, the estimation error cannot be recovered.
class DegenerateView : public Error {
public:
    using Error::Error;
};

class IllConditionedModel : public Error {
public:
    using Error::Error;
};

class FitFailure : public Error {
public:
    using Error::Error;
};

/// Rotation error reached |theta| >= pi/2.
class AssumptionViolation : public Error {
public:
    using Error::Error;
};

/// lambda_K - L <= 0, the probabilistic ellipse is undefined.
class PreconditionViolation : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class MissingArtifact : public Error {
public:
    using Error::Error;
};

}  // namespace vpursuit
