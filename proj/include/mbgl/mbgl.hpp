#pragma once

#include "mbgl/analysis.hpp"
#include "mbgl/core_model.hpp"
#include "mbgl/cross_validation.hpp"
#include "mbgl/dc_optimizer.hpp"
#include "mbgl/error.hpp"
#include "mbgl/fused_chain.hpp"
#include "mbgl/fused_glasso.hpp"
#include "mbgl/glasso.hpp"
#include "mbgl/io.hpp"
#include "mbgl/likelihood.hpp"
#include "mbgl/noise.hpp"
#include "mbgl/parallel.hpp"
#include "mbgl/suffstats.hpp"
#include "mbgl/types.hpp"
