#pragma once

// Umbrella header.

#include "geoseg/bench.hpp"
#include "geoseg/codec.hpp"
#include "geoseg/common.hpp"
#include "geoseg/degrade.hpp"
#include "geoseg/geo.hpp"
#include "geoseg/journal.hpp"
#include "geoseg/logits.hpp"
#include "geoseg/merge.hpp"
#include "geoseg/metrics.hpp"
#include "geoseg/ndvi.hpp"
#include "geoseg/pipeline.hpp"
#include "geoseg/raster.hpp"
#include "geoseg/resample.hpp"
#include "geoseg/sampling.hpp"
#include "geoseg/survey.hpp"
#include "geoseg/tiling.hpp"
#include "geoseg/workers.hpp"
