#pragma once

#include <stdexcept>
#include <string>

namespace sasrc {

enum class Errc {
  InvalidInput,
  NotSchurStable,
  NoUniqueLimitCycle,
  MuTooLarge,
  MuInfeasible,
  Infeasible,
  InvalidCertificatePair,
  Diverged,
  ConfigError,
};

inline const char* to_string(Errc code) {
  switch (code) {
    case Errc::InvalidInput: return "InvalidInput";
    case Errc::NotSchurStable: return "NotSchurStable";
    case Errc::NoUniqueLimitCycle: return "NoUniqueLimitCycle";
    case Errc::MuTooLarge: return "MuTooLarge";
    case Errc::MuInfeasible: return "MuInfeasible";
    case Errc::Infeasible: return "Infeasible";
    case Errc::InvalidCertificatePair: return "InvalidCertificatePair";
    case Errc::Diverged: return "Diverged";
    case Errc::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// Library error carrying a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// Raised by the LMI solver; carries the best margin reached.
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, double best_margin)
      : Error(Errc::Infeasible, what), best_margin_(best_margin) {}

  double best_margin() const noexcept { return best_margin_; }

 private:
  double best_margin_;
};

/// Raised when a closed-loop simulation produces a non-finite state.
class DivergedError : public Error {
 public:
  DivergedError(const std::string& what, long step)
      : Error(Errc::Diverged, what), step_(step) {}

  long step() const noexcept { return step_; }

 private:
  long step_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace sasrc
