#pragma once

#include "fracnl/errors.hpp"
#include "fracnl/linalg.hpp"
#include "fracnl/fracderiv.hpp"
#include "fracnl/mesh.hpp"
#include "fracnl/assembly.hpp"
#include "fracnl/problem.hpp"
#include "fracnl/solver.hpp"
#include "fracnl/harness.hpp"
#include "fracnl/config.hpp"
#include "fracnl/verify.hpp"
