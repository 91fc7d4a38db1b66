#pragma once

#include "driftsearch/agents.hpp"
#include "driftsearch/config.hpp"
#include "driftsearch/errors.hpp"
#include "driftsearch/field_io.hpp"
#include "driftsearch/flowgen.hpp"
#include "driftsearch/geometry.hpp"
#include "driftsearch/grid.hpp"
#include "driftsearch/metrics.hpp"
#include "driftsearch/potential.hpp"
#include "driftsearch/rng.hpp"
#include "driftsearch/scenario.hpp"
#include "driftsearch/sensing.hpp"
#include "driftsearch/targets.hpp"
#include "driftsearch/transport.hpp"
