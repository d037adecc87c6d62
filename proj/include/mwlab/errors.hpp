#pragma once

#include <stdexcept>
#include <string>

namespace mwlab {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define MWLAB_DEFINE_ERROR(Name)                                  \
  struct Name : Error {                                           \
    explicit Name(const std::string& msg) : Error(#Name ": " + msg) {} \
  }

// weights
MWLAB_DEFINE_ERROR(PointOnSingularSet);
MWLAB_DEFINE_ERROR(PointOutsideDomain);
MWLAB_DEFINE_ERROR(NonIntegrableWeight);
MWLAB_DEFINE_ERROR(SingularWeightAtSample);

// rubber band
MWLAB_DEFINE_ERROR(NonIntegrableDensity);
MWLAB_DEFINE_ERROR(GridMismatch);

// metric
MWLAB_DEFINE_ERROR(SingularWeight);
MWLAB_DEFINE_ERROR(SingularMetric);
MWLAB_DEFINE_ERROR(SingularPoint);
MWLAB_DEFINE_ERROR(IntegratorBlowup);

// operators / functional calculus
MWLAB_DEFINE_ERROR(WeightSingularOnGrid);
MWLAB_DEFINE_ERROR(AccretivityViolated);
MWLAB_DEFINE_ERROR(ResolventSingular);
MWLAB_DEFINE_ERROR(SpectrumOnBoundary);
MWLAB_DEFINE_ERROR(DefectiveBeyondTolerance);
MWLAB_DEFINE_ERROR(InsufficientTCoverage);

// transforms
MWLAB_DEFINE_ERROR(SingularJacobian);
MWLAB_DEFINE_ERROR(SupportTouchesBoundary);

// bvp
MWLAB_DEFINE_ERROR(PivotDegenerate);
MWLAB_DEFINE_ERROR(SolverSingular);

// cli
MWLAB_DEFINE_ERROR(ConfigInvalid);

#undef MWLAB_DEFINE_ERROR

}  // namespace mwlab
