#pragma once

#include "adsrank/error.hpp"
#include "adsrank/text.hpp"
#include "adsrank/random.hpp"
#include "adsrank/embeddings.hpp"
#include "adsrank/textsem.hpp"
#include "adsrank/lexical.hpp"
#include "adsrank/record.hpp"
#include "adsrank/vissem.hpp"
#include "adsrank/evaluator.hpp"
#include "adsrank/ranker.hpp"
#include "adsrank/dataio.hpp"
#include "adsrank/synth.hpp"
