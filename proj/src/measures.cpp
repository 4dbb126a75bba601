#include "pmcmc/measures.hpp"

namespace pmcmc {

template class BasicMeasure<double, false>;
template class BasicMeasure<double, true>;
template class BasicKernel<double>;

}  // namespace pmcmc
