#pragma once

#include "sacfv/config.hpp"
#include "sacfv/diagnostics.hpp"
#include "sacfv/errors.hpp"
#include "sacfv/field.hpp"
#include "sacfv/harness.hpp"
#include "sacfv/io.hpp"
#include "sacfv/mesh.hpp"
#include "sacfv/model.hpp"
#include "sacfv/noise.hpp"
#include "sacfv/quadrature.hpp"
#include "sacfv/solver.hpp"
