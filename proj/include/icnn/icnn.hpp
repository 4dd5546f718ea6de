#pragma once

#include "icnn/bda.hpp"
#include "icnn/bundle.hpp"
#include "icnn/convlayer.hpp"
#include "icnn/core.hpp"
#include "icnn/discretize.hpp"
#include "icnn/io.hpp"
#include "icnn/iscore.hpp"
#include "icnn/metrics.hpp"
#include "icnn/nn.hpp"
#include "icnn/parallel.hpp"
#include "icnn/pipeline.hpp"
#include "icnn/random.hpp"
#include "icnn/synth.hpp"
