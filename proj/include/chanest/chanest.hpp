#pragma once

#include <chanest/closed_form_metrics.hpp>
#include <chanest/errors.hpp>
#include <chanest/estimators.hpp>
#include <chanest/monte_carlo.hpp>
#include <chanest/parallel.hpp>
#include <chanest/receivers.hpp>
#include <chanest/rng.hpp>
#include <chanest/signal_model.hpp>
#include <chanest/sweep.hpp>
