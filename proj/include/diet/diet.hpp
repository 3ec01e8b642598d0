#pragma once

#include "diet/augment.hpp"
#include "diet/batching.hpp"
#include "diet/checkpoint.hpp"
#include "diet/config.hpp"
#include "diet/dataset.hpp"
#include "diet/encoder.hpp"
#include "diet/error.hpp"
#include "diet/head.hpp"
#include "diet/matrix.hpp"
#include "diet/metrics.hpp"
#include "diet/optim.hpp"
#include "diet/probe.hpp"
#include "diet/report.hpp"
#include "diet/rng.hpp"
#include "diet/sweep.hpp"
#include "diet/train.hpp"
