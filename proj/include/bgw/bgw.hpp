#pragma once

#include "bgw/control.hpp"
#include "bgw/error.hpp"
#include "bgw/model.hpp"
#include "bgw/model_io.hpp"
#include "bgw/passage.hpp"
#include "bgw/quad.hpp"
#include "bgw/scale.hpp"
#include "bgw/sim.hpp"
#include "bgw/weights.hpp"
