#pragma once
// Everything in one include.

#include "defport/errors.hpp"
#include "defport/numerics.hpp"
#include "defport/rng.hpp"
#include "defport/parallel.hpp"
#include "defport/market_model.hpp"
#include "defport/chain.hpp"
#include "defport/bond.hpp"
#include "defport/hjb.hpp"
#include "defport/two_regime.hpp"
#include "defport/sim.hpp"
