#pragma once

#include "sacp/conformal.hpp"
#include "sacp/error.hpp"
#include "sacp/experiment.hpp"
#include "sacp/grid.hpp"
#include "sacp/io.hpp"
#include "sacp/metrics.hpp"
#include "sacp/oracle.hpp"
#include "sacp/pgm.hpp"
#include "sacp/random.hpp"
#include "sacp/scores.hpp"
#include "sacp/synth.hpp"
#include "sacp/verify.hpp"
