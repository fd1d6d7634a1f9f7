#pragma once

#include "ebsp/alphabet.hpp"
#include "ebsp/automaton.hpp"
#include "ebsp/composition.hpp"
#include "ebsp/config.hpp"
#include "ebsp/corpus.hpp"
#include "ebsp/embedding.hpp"
#include "ebsp/enumerate.hpp"
#include "ebsp/error.hpp"
#include "ebsp/eval.hpp"
#include "ebsp/evaluate.hpp"
#include "ebsp/formula.hpp"
#include "ebsp/optree.hpp"
#include "ebsp/preservation.hpp"
#include "ebsp/random_formula.hpp"
#include "ebsp/reduce.hpp"
#include "ebsp/structure.hpp"
#include "ebsp/types.hpp"
