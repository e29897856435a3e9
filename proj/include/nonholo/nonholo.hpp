#pragma once

#include "nonholo/errors.hpp"
#include "nonholo/scalar.hpp"
#include "nonholo/expr.hpp"
#include "nonholo/model.hpp"
#include "nonholo/implicit.hpp"
#include "nonholo/geometry.hpp"
#include "nonholo/dynamics.hpp"
#include "nonholo/integrate.hpp"
#include "nonholo/fields.hpp"
#include "nonholo/scenarios.hpp"
#include "nonholo/verify.hpp"
