#pragma once

#include "eans/common.hpp"
#include "eans/dataset.hpp"
#include "eans/params.hpp"
#include "eans/adam.hpp"
#include "eans/scoring.hpp"
#include "eans/eans_index.hpp"
#include "eans/sampling.hpp"
#include "eans/objective.hpp"
#include "eans/evaluator.hpp"
#include "eans/checkpoint.hpp"
#include "eans/config.hpp"
#include "eans/trainer.hpp"
#include "eans/analysis.hpp"
