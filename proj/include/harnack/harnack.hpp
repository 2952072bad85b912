#pragma once

#include "harnack/errors.hpp"
#include "harnack/format.hpp"
#include "harnack/linalg.hpp"
#include "harnack/random.hpp"
#include "harnack/segment.hpp"
#include "harnack/coefficients.hpp"
#include "harnack/integrator.hpp"
#include "harnack/coupling.hpp"
#include "harnack/parallel.hpp"
#include "harnack/bounds.hpp"
#include "harnack/estimators.hpp"
#include "harnack/config.hpp"
