#pragma once

#include "approxai/approx_multiplier.hpp"
#include "approxai/bfloat16.hpp"
#include "approxai/csv.hpp"
#include "approxai/distill.hpp"
#include "approxai/error.hpp"
#include "approxai/fft.hpp"
#include "approxai/integrated_gradients.hpp"
#include "approxai/level_optimizer.hpp"
#include "approxai/matrix.hpp"
#include "approxai/model.hpp"
#include "approxai/model_io.hpp"
#include "approxai/parallel.hpp"
#include "approxai/pgm.hpp"
#include "approxai/rng.hpp"
#include "approxai/shapley.hpp"
