#pragma once

#include "usvyaw/error.hpp"
#include "usvyaw/estim.hpp"
#include "usvyaw/format.hpp"
#include "usvyaw/model.hpp"
#include "usvyaw/model_file.hpp"
#include "usvyaw/pipeline.hpp"
#include "usvyaw/signals.hpp"
#include "usvyaw/sim.hpp"
