#pragma once

#include <stdexcept>
#include <string>

namespace bvsol {

/// Base class for all library errors.
class error : public std::runtime_error {
public:
    explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A numeric argument violates its precondition (nonpositive viscosity, ...).
class invalid_parameter : public error {
public:
    explicit invalid_parameter(const std::string& msg) : error(msg) {}
};

/// Operation not defined for this model class (e.g. smooth gradient of a TV energy).
class unsupported_model : public error {
public:
    explicit unsupported_model(const std::string& msg) : error(msg) {}
};

/// Nonsmooth model queried for a subgradient quantity without a witness.
class witness_required : public error {
public:
    explicit witness_required(const std::string& msg) : error(msg) {}
};

/// Inner solver failed to reach the requested Euler residual.
class step_failure : public error {
public:
    step_failure(const std::string& msg, int step_index, double residual)
        : error(msg), step_index(step_index), residual(residual) {}
    int step_index;
    double residual;
};

/// State rejected by the model (NaN, outside the admissible box, ...).
class invalid_state : public error {
public:
    explicit invalid_state(const std::string& msg) : error(msg) {}
};

/// Evaluation outside the domain of an interpolant or curve.
class domain_error : public error {
public:
    explicit domain_error(const std::string& msg) : error(msg) {}
};

/// No admissible transition path between the requested endpoints.
class infeasible_transition : public error {
public:
    explicit infeasible_transition(const std::string& msg) : error(msg) {}
};

/// Viscous transition requested from a point with no unstable direction.
class no_transition : public error {
public:
    explicit no_transition(const std::string& msg) : error(msg) {}
};

/// Malformed experiment configuration.
class config_error : public error {
public:
    explicit config_error(const std::string& msg) : error(msg) {}
};

} // namespace bvsol
