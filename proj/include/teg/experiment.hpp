#pragma once

#include <string>

#include "teg/boundary.hpp"
#include "teg/probes.hpp"
#include "teg/trainer.hpp"

namespace teg {

// Everything one run needs, loadable from a single JSON file. Unknown keys
// are rejected.
struct ExperimentConfig {
    GeneratorConfig generator;
    TrainConfig train;
    ProbeConfig probe;
    WindowConfig window;
    double relDis = 0.05;
    int boundaryHeadEpochs = 30;
    double boundaryHeadLr = 0.05;
    std::uint64_t seed = 0;

    Json toJson() const;
    static ExperimentConfig fromJson(const Json& j);
    static ExperimentConfig load(const std::string& path);

    // Stamp for provenance lines in result files.
    std::uint64_t hash() const;

    // Propagate one global seed into every sub-config.
    void setSeed(std::uint64_t s);

    // teg-ps (alpha 0.0) or teg-fg (alpha 0.9).
    void applyPreset(const std::string& name);
};

Json probeConfigToJson(const ProbeConfig& cfg);
ProbeConfig probeConfigFromJson(const Json& j);

// End-to-end finite-difference check of the analytic gradients on a random
// small batch.
struct GradCheckReport {
    double maxRelError = 0;
    int coordsChecked = 0;
};
GradCheckReport runGradCheck(std::uint64_t seed, int coords = 60);

// The fixed desk-scale benchmark used by the directional experiments:
// 200 videos of 300 frames, 5 events from 5 classes, 4 themes.
GeneratorConfig benchmarkGenerator(std::uint64_t seed);
TrainConfig benchmarkTrain(double alpha, std::uint64_t seed);

struct BenchmarkScores {
    double eventAccuracy = 0;
    double sequenceAccuracy = 0;
};

// Pretrains with the given alpha on the benchmark dataset for this seed and
// runs both linear probes on the frozen backbone.
BenchmarkScores benchmarkProbeScores(double alpha, std::uint64_t seed);
BenchmarkScores probeScores(const EncoderParams& params, const Dataset& dataset,
                            const ProbeConfig& base);

// Frozen-head boundary detection F1, averaged over the dataset's videos.
double benchmarkBoundaryF1(const EncoderParams& params, const Dataset& dataset,
                           const WindowConfig& window, double relDis, int headEpochs,
                           double headLr, std::uint64_t seed);

}  // namespace teg
