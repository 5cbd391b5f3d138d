#pragma once

#include "perflow/errors.hpp"
#include "perflow/box.hpp"
#include "perflow/shift.hpp"
#include "perflow/model.hpp"
#include "perflow/numerics.hpp"
#include "perflow/parallel.hpp"
#include "perflow/flows.hpp"
#include "perflow/equilibria.hpp"
#include "perflow/certify.hpp"
#include "perflow/io.hpp"
