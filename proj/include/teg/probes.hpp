#pragma once

#include <cstdint>
#include <vector>

#include "teg/encoder.hpp"
#include "teg/synth_data.hpp"

namespace teg {

enum class ProbeTask { Event, Sequence };

struct ProbeConfig {
    ProbeTask task = ProbeTask::Event;
    int epochs = 100;
    double lr = 0.5;
    int batch = 32;
    std::uint64_t seed = 0;
    double valFraction = 0.25;
    int sequenceClips = 10;  // uniform clip spans per video for the sequence task

    void validate() const {
        checkConfig(lr > 0, "probe lr must be > 0");
        checkConfig(epochs >= 0, "probe epochs must be >= 0");
        checkConfig(batch >= 1, "probe batch must be >= 1");
        checkConfig(valFraction > 0 && valFraction < 1, "valFraction must lie in (0,1)");
        checkConfig(sequenceClips >= 1, "sequenceClips must be >= 1");
    }
};

struct ProbeError : std::runtime_error {
    explicit ProbeError(const std::string& msg) : std::runtime_error("probe error: " + msg) {}
};

// Frozen-backbone feature of a frame span [begin, end): stride-1 backbone pass
// followed by a temporal mean.
Vector extractFeatures(const EncoderParams& params, const VideoSample& video, int begin, int end);

struct ProbeResult {
    double trainAccuracy = 0;
    double valAccuracy = 0;
    int numClasses = 0;
    Matrix weights;   // featureDim x classes
    Vector bias;
};

// Multinomial logistic regression by SGD on frozen features.
ProbeResult linearProbe(const Matrix& features, const std::vector<int>& labels,
                        const ProbeConfig& cfg);

// Event task: one example per ground-truth event segment; sequence task:
// sequenceClips uniform spans per video, each an example with the theme label.
ProbeResult runProbe(const EncoderParams& params, const Dataset& dataset, const ProbeConfig& cfg);

// Cosine similarities of pooled backbone features over `clips` uniform
// consecutive spans of the video.
Matrix similarityMatrix(const EncoderParams& params, const VideoSample& video, int clips = 5);

double meanOffDiagonal(const Matrix& m);

}  // namespace teg
