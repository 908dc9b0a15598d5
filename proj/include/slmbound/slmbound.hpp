#pragma once

#include "slmbound/barankin.hpp"
#include "slmbound/bounds.hpp"
#include "slmbound/combinatorics.hpp"
#include "slmbound/errors.hpp"
#include "slmbound/estimators.hpp"
#include "slmbound/linalg.hpp"
#include "slmbound/mean_function.hpp"
#include "slmbound/model.hpp"
#include "slmbound/montecarlo.hpp"
#include "slmbound/normal.hpp"
#include "slmbound/philox.hpp"
#include "slmbound/quadrature.hpp"
