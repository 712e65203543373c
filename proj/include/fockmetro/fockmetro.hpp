#pragma once

#include "common.hpp"
#include "fock.hpp"
#include "probe_states.hpp"
#include "metrology.hpp"
#include "loss.hpp"
#include "lossmap.hpp"
#include "measurement.hpp"
#include "adaptive.hpp"
#include "oracle.hpp"
#include "io.hpp"
