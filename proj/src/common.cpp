#include "dance/error.hpp"
#include "dance/parallel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dance {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io: return "Io";
    case ErrorKind::MissingValue: return "MissingValue";
    case ErrorKind::DuplicateHeader: return "DuplicateHeader";
    case ErrorKind::TooFewRows: return "TooFewRows";
    case ErrorKind::UnknownVariable: return "UnknownVariable";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::TooFewSamples: return "TooFewSamples";
    case ErrorKind::DegenerateVariance: return "DegenerateVariance";
    case ErrorKind::TooFewCandidates: return "TooFewCandidates";
    case ErrorKind::SingularDenominator: return "SingularDenominator";
    case ErrorKind::SingularMomentMatrix: return "SingularMomentMatrix";
    case ErrorKind::EmptyDnctList: return "EmptyDnctList";
    case ErrorKind::BootstrapDegenerate: return "BootstrapDegenerate";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::InvalidGraph: return "InvalidGraph";
  }
  return "Unknown";
}

void set_thread_count(int n) {
#ifdef _OPENMP
  static const int default_threads = omp_get_max_threads();
  omp_set_num_threads(n > 0 ? n : default_threads);
#else
  (void)n;
#endif
}

int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace dance
