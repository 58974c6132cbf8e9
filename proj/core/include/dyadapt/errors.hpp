#pragma once

#include <stdexcept>
#include <string>

namespace dyadapt {

//! Invalid configuration or input (bad level, resolution constraint
//! violated, malformed file, ...).
class ConfigError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

//! No threshold on the candidate grid satisfies the propagation bound.
class CalibrationInfeasible : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

//! A non-finite value showed up where a finite one is required.
class NumericError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

} // namespace dyadapt
