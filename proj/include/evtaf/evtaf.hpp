#pragma once
/// @file evtaf.hpp
/// @brief Umbrella header.

#include "evtaf/augment.hpp"
#include "evtaf/baseline.hpp"
#include "evtaf/bench.hpp"
#include "evtaf/bfm.hpp"
#include "evtaf/core.hpp"
#include "evtaf/eval.hpp"
#include "evtaf/io.hpp"
#include "evtaf/motion.hpp"
#include "evtaf/taf.hpp"
#include "evtaf/window.hpp"
