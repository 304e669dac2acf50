#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rsplab/query.hpp"

namespace rsp {

using QueryId = std::uint32_t;

class RegistrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Query uses a feature the engine refuses.
class CapabilityError : public RegistrationError {
 public:
  CapabilityError(const std::string& what, std::vector<Feature> rejected)
      : RegistrationError(what), rejected_(std::move(rejected)) {}
  const std::vector<Feature>& rejected() const { return rejected_; }

 private:
  std::vector<Feature> rejected_;
};

// Monotonic milliseconds used to time an execution. Tests substitute a fake.
using ExecTimer = std::function<double()>;

inline double steady_ms() {
  using namespace std::chrono;
  return duration<double, std::milli>(steady_clock::now().time_since_epoch()).count();
}

}  // namespace rsp
