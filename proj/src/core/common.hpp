#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace hdf {

// Extents of a dense tensor, slowest-varying axis first.
using Shape = std::vector<int64_t>;

enum class ErrorCode {
  invalid_argument,
  shape_mismatch,
  io,
  numeric,
  internal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& msg);

int64_t numel(const Shape& s);
std::string to_string(const Shape& s);

// Single seeded generator; every module that owns parameters or draws random
// data receives one at construction so runs are reproducible per seed.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    return d(engine_);
  }
  double normal(double mean = 0.0, double stddev = 1.0) {
    std::normal_distribution<double> d(mean, stddev);
    return d(engine_);
  }
  int64_t uniform_int(int64_t lo, int64_t hi) {  // inclusive bounds
    std::uniform_int_distribution<int64_t> d(lo, hi);
    return d(engine_);
  }
  bool bernoulli(double p) {
    std::bernoulli_distribution d(p);
    return d(engine_);
  }
  uint64_t raw() { return engine_(); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

// Thread budget for GEMM-backed primitives. 1 == fully serial execution.
void set_num_threads(int n);
int num_threads();

// When enabled (default), every primitive validates that its output is
// finite and throws ErrorCode::numeric otherwise.
void set_finite_checks(bool on);
bool finite_checks();

}  // namespace hdf
