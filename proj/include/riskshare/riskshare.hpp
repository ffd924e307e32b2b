#ifndef RISKSHARE_RISKSHARE_HPP
#define RISKSHARE_RISKSHARE_HPP

#include "riskshare/errors.hpp"
#include "riskshare/prob_core.hpp"
#include "riskshare/lp.hpp"
#include "riskshare/density_search.hpp"
#include "riskshare/risk_measures.hpp"
#include "riskshare/agent_space.hpp"
#include "riskshare/infimal_convolution.hpp"
#include "riskshare/pareto.hpp"

#endif  // RISKSHARE_RISKSHARE_HPP
