#pragma once

#include <stdexcept>

namespace koopmoo {

// Malformed inputs: dimension mismatches, missing basis entries, invalid parameters.
struct ConfigurationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Data that cannot support a least-squares fit (e.g. an all-zero Psi_X).
struct DegenerateDataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// a(x) has an eigenvalue below the PSD floor, so no sigma with sigma sigma^T = a exists.
struct IndefiniteDiffusionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Euler-Maruyama step moved a state fraction by more than the allowed amount.
struct StabilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// exp(tL) would overflow for the requested horizon.
struct HorizonError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace koopmoo
