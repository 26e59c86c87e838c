#pragma once

#include "effop/error.hpp"
#include "effop/linalg.hpp"
#include "effop/spaces.hpp"
#include "effop/transform.hpp"
#include "effop/solver.hpp"
#include "effop/effective.hpp"
#include "effop/observables.hpp"
