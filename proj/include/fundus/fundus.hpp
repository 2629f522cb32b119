#pragma once

#include "fundus/augment.hpp"
#include "fundus/color.hpp"
#include "fundus/dpfr.hpp"
#include "fundus/error.hpp"
#include "fundus/filters.hpp"
#include "fundus/histops.hpp"
#include "fundus/image.hpp"
#include "fundus/io.hpp"
#include "fundus/metrics.hpp"
#include "fundus/pca_amp.hpp"
#include "fundus/pipeline.hpp"
#include "fundus/resize.hpp"
#include "fundus/roi.hpp"
#include "fundus/vessel_erosion.hpp"
