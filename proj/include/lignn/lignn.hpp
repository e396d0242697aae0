#pragma once

#include <lignn/access.hpp>
#include <lignn/analytic.hpp>
#include <lignn/dram.hpp>
#include <lignn/error.hpp>
#include <lignn/experiment.hpp>
#include <lignn/filter.hpp>
#include <lignn/graph.hpp>
#include <lignn/merger.hpp>
#include <lignn/plot.hpp>
#include <lignn/rng.hpp>
#include <lignn/simulate.hpp>
