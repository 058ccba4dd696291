#pragma once

#include "sepdiff/config.hpp"
#include "sepdiff/errors.hpp"
#include "sepdiff/fft.hpp"
#include "sepdiff/guidance.hpp"
#include "sepdiff/harness.hpp"
#include "sepdiff/metrics.hpp"
#include "sepdiff/prior.hpp"
#include "sepdiff/rng.hpp"
#include "sepdiff/schedule.hpp"
#include "sepdiff/selfcheck.hpp"
#include "sepdiff/signals.hpp"
#include "sepdiff/solvers.hpp"
#include "sepdiff/vecio.hpp"
#include "sepdiff/wav.hpp"
