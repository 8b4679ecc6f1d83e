#pragma once

#include "arsgeo/abnormal.hpp"
#include "arsgeo/barrier.hpp"
#include "arsgeo/dual.hpp"
#include "arsgeo/errors.hpp"
#include "arsgeo/expr.hpp"
#include "arsgeo/frame.hpp"
#include "arsgeo/geodesics.hpp"
#include "arsgeo/heat.hpp"
#include "arsgeo/nilpotent.hpp"
#include "arsgeo/quadrature.hpp"
#include "arsgeo/roots.hpp"
