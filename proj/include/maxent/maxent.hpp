#pragma once

#include "maxent/common.hpp"
#include "maxent/support.hpp"
#include "maxent/measurement.hpp"
#include "maxent/problem.hpp"
#include "maxent/quadrature.hpp"
#include "maxent/stability.hpp"
#include "maxent/dual_solver.hpp"
#include "maxent/sampling.hpp"
#include "maxent/certificate.hpp"
#include "maxent/oracle.hpp"
