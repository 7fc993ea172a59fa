#pragma once

#include "cmf/error.hpp"
#include "cmf/random.hpp"
#include "cmf/text.hpp"
#include "cmf/series.hpp"
#include "cmf/rig.hpp"
#include "cmf/config.hpp"
#include "cmf/dataset_io.hpp"
#include "cmf/dsp.hpp"
#include "cmf/splits.hpp"
#include "cmf/nn.hpp"
#include "cmf/metrics.hpp"
#include "cmf/trainer.hpp"
#include "cmf/pipeline.hpp"
#include "cmf/report.hpp"
