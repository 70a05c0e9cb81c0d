#pragma once

#include <cstdint>
#include <vector>

#include "teg/encoder.hpp"
#include "teg/synth_data.hpp"

namespace teg {

struct WindowConfig {
    int windowFrames = 32;
    int windowStride = 3;
    int centerOffset = 16;
    double positiveRadiusSeconds = 0.15;

    void validate() const {
        checkConfig(windowFrames >= 2, "windowFrames must be >= 2");
        checkConfig(windowStride >= 1, "windowStride must be >= 1");
        checkConfig(centerOffset >= 1 && centerOffset < windowFrames,
                    "centerOffset must lie in [1, windowFrames)");
        checkConfig(positiveRadiusSeconds > 0, "positiveRadiusSeconds must be > 0");
    }

    Json toJson() const;
    static WindowConfig fromJson(const Json& j);
};

struct LabeledWindow {
    int startFrame = 0;
    bool positive = false;
};

// Ground-truth boundary timestamps; possibly several annotator sets.
struct BoundaryAnnotation {
    std::vector<std::vector<double>> sets;
    double videoLengthSeconds = 0;
};

struct DetectionSet {
    std::vector<double> timestamps;  // sorted, seconds
};

struct F1Result {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
    int matchedSetIndex = 0;
};

// Enumerates windows over the video; a window is positive when its center
// time falls within positiveRadiusSeconds of some boundary.
std::vector<LabeledWindow> labelWindows(const VideoSample& video,
                                        const std::vector<double>& boundaries,
                                        const WindowConfig& cfg);

struct BoundaryHead {
    Vector weights;  // 2 * featureDim
    double bias = 0;
};

// Concatenated before/after-center pooled backbone features of one window.
Vector windowFeatures(const EncoderParams& params, const VideoSample& video, int startFrame,
                      const WindowConfig& cfg);

// Binary logistic head on frozen backbone features, balanced batches.
BoundaryHead trainBoundaryHead(const EncoderParams& params,
                               const std::vector<const VideoSample*>& videos,
                               const WindowConfig& cfg, int epochs, double lr, std::uint64_t seed);

// Classifies every window and merges runs of consecutive positives into one
// timestamp by averaging their center times.
DetectionSet detect(const BoundaryHead& head, const EncoderParams& params, const VideoSample& video,
                    const WindowConfig& cfg);

// Greedy one-to-one matching in ascending time order; a detection matches an
// unmatched ground truth iff |dt| < relDis * videoLength. Best annotation set
// by F1 is reported.
F1Result f1Score(const DetectionSet& detections, const BoundaryAnnotation& annotation,
                 double relDis);

// Index of the annotation set with the highest mean pairwise F1 against the
// other sets; used to pick training targets from multi-annotator data.
int selectTrainingAnnotation(const BoundaryAnnotation& annotation, double relDis);

}  // namespace teg
