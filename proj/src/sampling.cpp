#include "teg/sampling.hpp"

namespace teg {

void ClipSpec::validate(int videoFrames) const {
    checkContract(startFrame >= 0, "clip startFrame must be >= 0");
    checkContract(numFrames >= 1, "clip numFrames must be >= 1");
    checkContract(stride >= 1, "clip stride must be >= 1");
    checkContract(lastFrame() < videoFrames, "clip extends past end of video");
}

std::string samplingModeName(SamplingMode mode) {
    switch (mode) {
        case SamplingMode::LongShortContained: return "long-short-contained";
        case SamplingMode::LongShortRandom: return "long-short-random";
        case SamplingMode::ShortShortRandom: return "short-short-random";
        case SamplingMode::ShortShortContained: return "short-short-contained";
    }
    throw ContractError("bad SamplingMode");
}

SamplingMode samplingModeFromString(const std::string& name) {
    if (name == "long-short-contained") return SamplingMode::LongShortContained;
    if (name == "long-short-random") return SamplingMode::LongShortRandom;
    if (name == "short-short-random") return SamplingMode::ShortShortRandom;
    if (name == "short-short-contained") return SamplingMode::ShortShortContained;
    throw ConfigError("unknown sampling mode '" + name + "'");
}

namespace {

int drawStart(int videoFrames, int span, Rng& rng, const char* what) {
    if (span > videoFrames)
        throw SamplingError(std::string(what) + " clip span exceeds video length");
    std::uniform_int_distribution<int> dist(0, videoFrames - span);
    return dist(rng);
}

}  // namespace

ClipPair sampleClipPair(int videoFrames, SamplingMode mode, int longT, int longStride, int shortT,
                        int shortStride, Rng& rng) {
    const bool shortShort =
        mode == SamplingMode::ShortShortRandom || mode == SamplingMode::ShortShortContained;
    const bool contained =
        mode == SamplingMode::LongShortContained || mode == SamplingMode::ShortShortContained;

    ClipPair pair;
    pair.longClip.numFrames = shortShort ? shortT : longT;
    pair.longClip.stride = shortShort ? shortStride : longStride;
    pair.shortClip.numFrames = shortT;
    pair.shortClip.stride = shortStride;

    const int longSpan = pair.longClip.span();
    const int shortSpan = pair.shortClip.span();
    pair.longClip.startFrame = drawStart(videoFrames, longSpan, rng, "long");

    if (contained) {
        if (shortSpan > longSpan)
            throw SamplingError("short clip span exceeds long clip span in contained mode");
        std::uniform_int_distribution<int> dist(pair.longClip.startFrame,
                                                pair.longClip.lastFrame() - (shortSpan - 1));
        pair.shortClip.startFrame = dist(rng);
    } else {
        pair.shortClip.startFrame = drawStart(videoFrames, shortSpan, rng, "short");
    }

    pair.longClip.validate(videoFrames);
    pair.shortClip.validate(videoFrames);
    return pair;
}

ClipPair sampleClipPair(int videoFrames, SamplingMode mode, int longT, int longStride, int shortT,
                        int shortStride, std::uint64_t seed) {
    Rng rng = makeRng(seed);
    return sampleClipPair(videoFrames, mode, longT, longStride, shortT, shortStride, rng);
}

std::vector<int> frameIndices(const ClipSpec& clip) {
    std::vector<int> out(static_cast<std::size_t>(clip.numFrames));
    for (int i = 0; i < clip.numFrames; ++i) out[i] = clip.startFrame + i * clip.stride;
    return out;
}

}  // namespace teg
