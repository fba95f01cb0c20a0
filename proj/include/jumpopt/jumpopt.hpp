#pragma once

#include "jumpopt/errors.hpp"
#include "jumpopt/format.hpp"
#include "jumpopt/rng.hpp"
#include "jumpopt/extended_real.hpp"
#include "jumpopt/quadrature.hpp"
#include "jumpopt/distribution.hpp"
#include "jumpopt/chain.hpp"
#include "jumpopt/frictions.hpp"
#include "jumpopt/market.hpp"
#include "jumpopt/policy.hpp"
#include "jumpopt/regime_value.hpp"
#include "jumpopt/verify.hpp"
#include "jumpopt/config.hpp"
#include "jumpopt/commands.hpp"
