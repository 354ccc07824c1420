#pragma once

// Everything at once.

#include "argmine/corpus.hpp"
#include "argmine/error.hpp"
#include "argmine/eval.hpp"
#include "argmine/feature_types.hpp"
#include "argmine/features.hpp"
#include "argmine/features_dialogue.hpp"
#include "argmine/features_wlda.hpp"
#include "argmine/harness.hpp"
#include "argmine/models.hpp"
#include "argmine/report.hpp"
#include "argmine/rng.hpp"
#include "argmine/synth.hpp"
#include "argmine/tensor.hpp"
#include "argmine/textproc.hpp"
