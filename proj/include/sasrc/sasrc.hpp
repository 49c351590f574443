#pragma once

#include "sasrc/errors.hpp"
#include "sasrc/numerics.hpp"
#include "sasrc/model.hpp"
#include "sasrc/nominal.hpp"
#include "sasrc/lmi.hpp"
#include "sasrc/robust.hpp"
#include "sasrc/control_sim.hpp"
