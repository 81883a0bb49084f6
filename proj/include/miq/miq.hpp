#pragma once

// Umbrella header for the motivational-interviewing quality toolkit.

#include "miq/corpus.hpp"
#include "miq/errors.hpp"
#include "miq/explain.hpp"
#include "miq/features.hpp"
#include "miq/format.hpp"
#include "miq/gateway.hpp"
#include "miq/hash.hpp"
#include "miq/lexicon.hpp"
#include "miq/mathx.hpp"
#include "miq/model.hpp"
#include "miq/parallel.hpp"
#include "miq/promptgen.hpp"
#include "miq/rng.hpp"
#include "miq/selection.hpp"
#include "miq/stats.hpp"
