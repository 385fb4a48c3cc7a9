#pragma once

#include "intentbridge/app_catalog.hpp"
#include "intentbridge/baselines.hpp"
#include "intentbridge/config.hpp"
#include "intentbridge/error.hpp"
#include "intentbridge/evaluator.hpp"
#include "intentbridge/http_backend.hpp"
#include "intentbridge/intent_generator.hpp"
#include "intentbridge/lm_backend.hpp"
#include "intentbridge/pipeline.hpp"
#include "intentbridge/recommender.hpp"
#include "intentbridge/relation.hpp"
#include "intentbridge/relation_selector.hpp"
#include "intentbridge/service.hpp"
#include "intentbridge/session.hpp"
