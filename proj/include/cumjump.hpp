#pragma once

#include "cumjump/error.hpp"
#include "cumjump/special.hpp"
#include "cumjump/marks.hpp"
#include "cumjump/interp.hpp"
#include "cumjump/quadrature.hpp"
#include "cumjump/pide.hpp"
#include "cumjump/bromwich.hpp"
#include "cumjump/mc.hpp"
#include "cumjump/calib.hpp"
#include "cumjump/config.hpp"
#include "cumjump/experiments.hpp"
