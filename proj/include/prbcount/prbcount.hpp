#pragma once

#include "prbcount/anonymizer.hpp"
#include "prbcount/calibration.hpp"
#include "prbcount/core.hpp"
#include "prbcount/counter.hpp"
#include "prbcount/dumpstore.hpp"
#include "prbcount/pipeline.hpp"
#include "prbcount/series_io.hpp"
#include "prbcount/simulator.hpp"
#include "prbcount/statbounds.hpp"
