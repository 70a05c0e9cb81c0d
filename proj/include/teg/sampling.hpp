#pragma once

#include <string>
#include <vector>

#include "teg/common.hpp"
#include "teg/rng.hpp"

namespace teg {

struct ClipSpec {
    int startFrame = 0;
    int numFrames = 1;
    int stride = 1;

    // Index of the last sampled frame.
    int lastFrame() const { return startFrame + (numFrames - 1) * stride; }
    int span() const { return (numFrames - 1) * stride + 1; }
    void validate(int videoFrames) const;
};

struct ClipPair {
    ClipSpec longClip;
    ClipSpec shortClip;
};

enum class SamplingMode { LongShortContained, LongShortRandom, ShortShortRandom, ShortShortContained };

std::string samplingModeName(SamplingMode mode);
SamplingMode samplingModeFromString(const std::string& name);

struct SamplingError : ConfigError {
    explicit SamplingError(const std::string& msg) : ConfigError("sampling: " + msg) {}
};

ClipPair sampleClipPair(int videoFrames, SamplingMode mode, int longT, int longStride, int shortT,
                        int shortStride, Rng& rng);
ClipPair sampleClipPair(int videoFrames, SamplingMode mode, int longT, int longStride, int shortT,
                        int shortStride, std::uint64_t seed);

std::vector<int> frameIndices(const ClipSpec& clip);

}  // namespace teg
