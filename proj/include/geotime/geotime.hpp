#pragma once

// Umbrella header: the full image time/location inference engine.

#include "geotime/backends.hpp"
#include "geotime/cache.hpp"
#include "geotime/combiner.hpp"
#include "geotime/config.hpp"
#include "geotime/errors.hpp"
#include "geotime/evalkit.hpp"
#include "geotime/http_backends.hpp"
#include "geotime/noise_filter.hpp"
#include "geotime/normalize.hpp"
#include "geotime/perceiver.hpp"
#include "geotime/pipeline.hpp"
#include "geotime/prompts.hpp"
#include "geotime/reasoner.hpp"
#include "geotime/replay.hpp"
#include "geotime/retriever.hpp"
#include "geotime/trace.hpp"
#include "geotime/types.hpp"
#include "geotime/util.hpp"
