#pragma once

#include <stdexcept>
#include <string>

namespace pmcmc {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define PMCMC_ERROR(Name)                                               \
  class Name : public Error {                                           \
   public:                                                              \
    explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
  }

PMCMC_ERROR(ZeroMass);
PMCMC_ERROR(DimensionMismatch);
PMCMC_ERROR(MissingFiniteFace);
PMCMC_ERROR(MissingDensity);
PMCMC_ERROR(BudgetExceeded);
PMCMC_ERROR(InvalidSpec);
PMCMC_ERROR(InvalidPotential);
PMCMC_ERROR(NonAffine);
PMCMC_ERROR(Extinction);
PMCMC_ERROR(UnboundedPotential);
PMCMC_ERROR(SymmetryViolation);
PMCMC_ERROR(RangeError);
PMCMC_ERROR(ScaleExceeded);
PMCMC_ERROR(UnsupportedOrder);
PMCMC_ERROR(NotImplemented);
PMCMC_ERROR(ConfigError);
PMCMC_ERROR(CheckFailure);

#undef PMCMC_ERROR

}  // namespace pmcmc
