#pragma once

#include "quadrature.hpp"
#include "soe.hpp"
#include "theory.hpp"
#include "mesh.hpp"
#include "fracops.hpp"
#include "stability.hpp"
#include "spatial.hpp"
#include "timestepper.hpp"
#include "experiments.hpp"
#include "reference.hpp"
#include "config.hpp"
