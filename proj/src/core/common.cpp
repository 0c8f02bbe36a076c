#include "core/common.hpp"

#include <Eigen/Core>
#include <atomic>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hdf {

void fail(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

int64_t numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t e : s) n *= e;
  return n;
}

std::string to_string(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ')';
  return os.str();
}

namespace {
std::atomic<int> g_threads{1};
std::atomic<bool> g_finite_checks{true};
}  // namespace

void set_num_threads(int n) {
  if (n < 1) fail(ErrorCode::invalid_argument, "thread count must be >= 1");
  g_threads = n;
  Eigen::setNbThreads(n);
#ifdef _OPENMP
  omp_set_num_threads(n);
#endif
}

int num_threads() { return g_threads; }

void set_finite_checks(bool on) { g_finite_checks = on; }
bool finite_checks() { return g_finite_checks; }

}  // namespace hdf
