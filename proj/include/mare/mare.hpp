#pragma once

// Umbrella header for the whole toolkit.

#include "mare/channels.hpp"
#include "mare/lmi.hpp"
#include "mare/matrix.hpp"
#include "mare/problem_io.hpp"
#include "mare/riccati.hpp"
#include "mare/sim.hpp"
#include "mare/stability.hpp"
#include "mare/sweep.hpp"
