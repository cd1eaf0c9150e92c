#pragma once

#include "aggmin/analytic.hpp"
#include "aggmin/config.hpp"
#include "aggmin/discretization.hpp"
#include "aggmin/energy.hpp"
#include "aggmin/errors.hpp"
#include "aggmin/euler_lagrange.hpp"
#include "aggmin/minimize.hpp"
#include "aggmin/numerics.hpp"
#include "aggmin/parallel.hpp"
#include "aggmin/potentials.hpp"
#include "aggmin/run.hpp"
#include "aggmin/selftest.hpp"
