#pragma once

#include <stdexcept>
#include <string>

namespace gridchase {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// grid
struct CycleDetected : Error { using Error::Error; };
struct DisconnectedBus : Error { using Error::Error; };
struct NonpositiveImpedance : Error { using Error::Error; };
struct DuplicateChild : Error { using Error::Error; };
struct AsymmetricInput : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };

// profiles / io
struct SchemaError : Error { using Error::Error; };
struct NonFiniteValue : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

// solver and consumers
struct SolverFailure : Error { using Error::Error; };
struct InfeasibleConsistentSet : Error { using Error::Error; };
struct DegenerateRange : Error { using Error::Error; };
struct DomainError : Error { using Error::Error; };

struct AssumptionViolation : Error {
    AssumptionViolation(const std::string& what, long step)
        : Error(what), step(step) {}
    long step;
};

}  // namespace gridchase
