#pragma once

#include "calibloss/baselines.hpp"
#include "calibloss/binning.hpp"
#include "calibloss/decisions.hpp"
#include "calibloss/distributions.hpp"
#include "calibloss/error.hpp"
#include "calibloss/experiments.hpp"
#include "calibloss/random_laws.hpp"
#include "calibloss/report.hpp"
#include "calibloss/rng.hpp"
#include "calibloss/scdl.hpp"
#include "calibloss/selftest.hpp"
