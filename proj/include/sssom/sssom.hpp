#pragma once

#include "sssom/cell.hpp"
#include "sssom/classify.hpp"
#include "sssom/core.hpp"
#include "sssom/evaluate.hpp"
#include "sssom/exposure.hpp"
#include "sssom/geojson.hpp"
#include "sssom/grid.hpp"
#include "sssom/ingest.hpp"
#include "sssom/partition.hpp"
#include "sssom/synthetic.hpp"
