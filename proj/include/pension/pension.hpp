#pragma once

#include "pension/corridor.hpp"
#include "pension/ledger.hpp"
#include "pension/market_model.hpp"
#include "pension/optimize.hpp"
#include "pension/parallel.hpp"
#include "pension/piecewise.hpp"
#include "pension/pool.hpp"
#include "pension/settlement.hpp"
