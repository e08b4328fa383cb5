#pragma once

#include <stdexcept>
#include <string>

namespace vmig {

// Base of every error the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Vehicle placed exactly on an RSU, or any other non-positive distance.
class GeometryError : public Error {
public:
    using Error::Error;
};

// A hosted vehicle received no compute share.
class AllocationError : public Error {
public:
    using Error::Error;
};

// step() called after the final slot of the episode.
class EpisodeError : public Error {
public:
    using Error::Error;
};

// Invalid or unknown configuration; the message carries the key path.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Non-finite loss, gradient or sample during training.
class DivergenceError : public Error {
public:
    using Error::Error;
};

// Operation called in the wrong state (e.g. backward without forward).
class StateError : public Error {
public:
    using Error::Error;
};

// Unknown user or RSU index.
class ReferenceError : public Error {
public:
    using Error::Error;
};

// Vector or matrix dimensions disagree.
class DimensionError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace vmig
