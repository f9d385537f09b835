#pragma once

#include "cbc/analysis.hpp"
#include "cbc/averaging.hpp"
#include "cbc/config.hpp"
#include "cbc/continuation.hpp"
#include "cbc/controller.hpp"
#include "cbc/errors.hpp"
#include "cbc/models.hpp"
#include "cbc/sim.hpp"
