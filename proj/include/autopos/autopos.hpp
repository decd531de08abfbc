#ifndef AUTOPOS_AUTOPOS_HPP_
#define AUTOPOS_AUTOPOS_HPP_

#include "autopos/core.hpp"
#include "autopos/simulator.hpp"
#include "autopos/closed_form.hpp"
#include "autopos/cgp.hpp"
#include "autopos/eval.hpp"
#include "autopos/config.hpp"
#include "autopos/runner.hpp"

#endif  // AUTOPOS_AUTOPOS_HPP_
