#pragma once

#include "checkpoint.hpp"
#include "clustering.hpp"
#include "data.hpp"
#include "dec.hpp"
#include "geometry.hpp"
#include "knn.hpp"
#include "model.hpp"
#include "numeric.hpp"
#include "parallel.hpp"
#include "pipeline.hpp"
#include "proximity.hpp"
#include "rng.hpp"
#include "trace.hpp"
