#pragma once

#include <stdexcept>
#include <string>

namespace bbmld {

/// Input outside the admissible parameter region.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A time argument outside the interval an operation is defined on.
class RangeError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

class PopulationCapExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnknownParticle : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

class TimeOutsideSegment : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

class EmptyLevelSet : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// First-passage level at or above the starting value of the V-process.
class DegenerateLevel : public DomainError {
public:
    using DomainError::DomainError;
};

class InsufficientTail : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EmptySample : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace bbmld
