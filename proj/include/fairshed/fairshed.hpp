#ifndef FAIRSHED_FAIRSHED_HPP
#define FAIRSHED_FAIRSHED_HPP

#include "caseio.hpp"
#include "scenario.hpp"
#include "conic.hpp"
#include "solver.hpp"
#include "fairness.hpp"
#include "study.hpp"

#endif  // FAIRSHED_FAIRSHED_HPP
