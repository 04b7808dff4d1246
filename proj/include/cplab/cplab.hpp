#ifndef CPLAB_CPLAB_HPP
#define CPLAB_CPLAB_HPP

#include "cplab/distributions.hpp"
#include "cplab/errors.hpp"
#include "cplab/markov.hpp"
#include "cplab/metrics.hpp"
#include "cplab/parallel.hpp"
#include "cplab/random.hpp"
#include "cplab/threshold.hpp"
#include "cplab/triangular_array.hpp"

#endif  // CPLAB_CPLAB_HPP
