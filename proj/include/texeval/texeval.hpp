#pragma once

#include "texeval/bleu.hpp"
#include "texeval/config.hpp"
#include "texeval/corpus.hpp"
#include "texeval/embsim.hpp"
#include "texeval/error.hpp"
#include "texeval/generator.hpp"
#include "texeval/harness.hpp"
#include "texeval/ngram_lm.hpp"
#include "texeval/nll.hpp"
#include "texeval/oracle.hpp"
#include "texeval/report.hpp"
