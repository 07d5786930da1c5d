#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "starflow/error.hpp"
#include "starflow/numfmt.hpp"
#include "starflow/parallel.hpp"

namespace starflow {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNonStarShaped: return "NON_STAR_SHAPED";
    case ErrorCode::kBadGrid: return "BAD_GRID";
    case ErrorCode::kDegenerate: return "DEGENERATE";
    case ErrorCode::kBlowup: return "BLOWUP";
    case ErrorCode::kFitFailed: return "FIT_FAILED";
    case ErrorCode::kWindowTooCoarse: return "WINDOW_TOO_COARSE";
    case ErrorCode::kFNonpositive: return "F_NONPOSITIVE";
    case ErrorCode::kNonpositiveTime: return "NONPOSITIVE_TIME";
    case ErrorCode::kOverflowGuard: return "OVERFLOW_GUARD";
    case ErrorCode::kNotEnclosing: return "NOT_ENCLOSING";
    case ErrorCode::kEmptyWindow: return "EMPTY_WINDOW";
    case ErrorCode::kNoBlowup: return "NO_BLOWUP";
    case ErrorCode::kNewtonDiverged: return "NEWTON_DIVERGED";
    case ErrorCode::kBadSigma: return "BAD_SIGMA";
    case ErrorCode::kParseError: return "PARSE_ERROR";
    case ErrorCode::kValidationError: return "VALIDATION_ERROR";
    case ErrorCode::kMissingArtifact: return "MISSING_ARTIFACT";
    case ErrorCode::kInvalidArgument: return "INVALID_ARGUMENT";
  }
  return "UNKNOWN";
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  if (s == "nan") return NAN;
  const std::string buf(s);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(buf.c_str(), &end);
  if (buf.empty() || end != buf.c_str() + buf.size() || errno == ERANGE)
    throw Error(ErrorCode::kParseError, "not a number: '" + buf + "'");
  return v;
}

namespace {
int g_threads = 0;
}

void set_num_threads(int threads) { g_threads = threads < 1 ? 0 : threads; }

int max_threads() {
#ifdef STARFLOW_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

int num_threads() { return g_threads > 0 ? g_threads : max_threads(); }

}  // namespace starflow
