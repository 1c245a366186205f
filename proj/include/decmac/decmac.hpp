#pragma once

#include "decmac/fading.hpp"
#include "decmac/interference.hpp"
#include "decmac/oracles.hpp"
#include "decmac/policy.hpp"
#include "decmac/solver.hpp"
