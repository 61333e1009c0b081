#pragma once

// Umbrella header for the reduced-order WPP stability toolkit.

#include "tlroa/commands.hpp"
#include "tlroa/errors.hpp"
#include "tlroa/geometry.hpp"
#include "tlroa/integrate.hpp"
#include "tlroa/io.hpp"
#include "tlroa/linalg.hpp"
#include "tlroa/model.hpp"
#include "tlroa/network.hpp"
#include "tlroa/roa.hpp"
#include "tlroa/scenario.hpp"
