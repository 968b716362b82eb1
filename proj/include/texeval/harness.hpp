#pragma once

// Experiment pipelines. Stages run in sequence; every random draw comes from
// a named substream of a configured seed, so thread count never changes a
// metric value.

#include "texeval/config.hpp"
#include "texeval/report.hpp"

namespace texeval {

/// Oracle -> fixed-length training and test samples -> n-gram baseline at
/// each checkpoint -> NLL-oracle and NLL-test of the checkpoint.
MetricReport run_synthetic(const ExperimentConfig& cfg);

/// Text corpus -> 50/50 split -> n-gram baseline at each checkpoint -> BLEU
/// against both halves, Self-BLEU, EmbSim against the training half and
/// NLL-test on the test half.
MetricReport run_real(const ExperimentConfig& cfg);

MetricReport run_experiment(const ExperimentConfig& cfg);

}  // namespace texeval
