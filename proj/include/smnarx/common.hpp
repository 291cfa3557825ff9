#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace smnarx {

using Index = Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration or argument (bad lags, non-stochastic matrix, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Vector or matrix sizes that do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Dataset content that cannot be used (segment too short, malformed CSV, ...).
class DataError : public Error {
public:
    using Error::Error;
};

/// Simulated trajectory left the overflow guard.
class SimulationDiverged : public Error {
public:
    using Error::Error;
};

/// Forward recursion produced a zero or non-finite normalizer.
class DegenerateEmissions : public Error {
public:
    using Error::Error;
};

/// Every EM restart collapsed or failed.
class EstimationFailure : public Error {
public:
    using Error::Error;
};

inline constexpr double kEmissionFloor = 1e-300;
inline constexpr double kStochasticTol = 1e-10;

} // namespace smnarx
