#pragma once

#include "gfcf/dataset.hpp"
#include "gfcf/errors.hpp"
#include "gfcf/evaluate.hpp"
#include "gfcf/filters.hpp"
#include "gfcf/metrics.hpp"
#include "gfcf/recommend.hpp"
#include "gfcf/sparse.hpp"
#include "gfcf/spectral.hpp"
#include "gfcf/theory.hpp"
