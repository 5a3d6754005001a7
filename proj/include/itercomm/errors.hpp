#pragma once

#include <stdexcept>
#include <string>

namespace itercomm {

/// Bad static configuration (graph, partition, sizes).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// API misuse by the caller (wrong call order, foreign handle, ...).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Peers disagree on the wire (size mismatch, unknown tag, ...).
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No pending delivery can ever complete the awaited requests.
class ProtocolDeadlock : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace itercomm
