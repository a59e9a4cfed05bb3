#pragma once

#include "regflow/error.hpp"
#include "regflow/grid.hpp"
#include "regflow/head_angle.hpp"
#include "regflow/imaging.hpp"
#include "regflow/interpolate.hpp"
#include "regflow/io.hpp"
#include "regflow/losses.hpp"
#include "regflow/metrics.hpp"
#include "regflow/morphology.hpp"
#include "regflow/optimizer.hpp"
#include "regflow/parallel.hpp"
#include "regflow/phantom.hpp"
#include "regflow/register.hpp"
#include "regflow/report.hpp"
#include "regflow/resample.hpp"
