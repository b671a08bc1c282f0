#pragma once

#include "gvc/controller.hpp"
#include "gvc/error.hpp"
#include "gvc/experiment.hpp"
#include "gvc/metrics.hpp"
#include "gvc/pipeline.hpp"
#include "gvc/predictor.hpp"
#include "gvc/predictor_json.hpp"
#include "gvc/trace.hpp"
