#pragma once

#include "bounds.hpp"
#include "cascade.hpp"
#include "diagnostics.hpp"
#include "environment.hpp"
#include "errors.hpp"
#include "lattice.hpp"
#include "log_sum_exp.hpp"
#include "parallel.hpp"
#include "philox.hpp"
#include "statistics.hpp"
#include "transfer.hpp"
