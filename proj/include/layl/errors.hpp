#pragma once
#include <stdexcept>
#include <string>

namespace layl {

// Invalid user-facing configuration (bad config keys, ranges, missing assets).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// File parsing / serialization failures.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Math domain violations (log of negative, degenerate quaternion, ...).
struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

// API contract violations (non-scalar backward, shape mismatch, ...).
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// Guidance bridge: the request may be retried.
struct BridgeTimeoutError : std::runtime_error {
    explicit BridgeTimeoutError(const std::string& msg) : std::runtime_error(msg) {}
};

// Guidance bridge: the peer violated the wire protocol; do not retry.
struct BridgeProtocolError : std::runtime_error {
    explicit BridgeProtocolError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace layl
