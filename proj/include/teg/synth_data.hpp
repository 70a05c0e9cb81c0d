#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "teg/common.hpp"
#include "teg/serialize.hpp"

namespace teg {

// Parameters of the synthetic event-video generator. Videos live in feature
// space: every frame is theme prototype + event prototype + isotropic noise.
struct GeneratorConfig {
    int numVideos = 200;
    int framesPerVideo = 300;
    double fps = 30.0;
    int featureDim = 16;
    int numEventClasses = 5;
    int numThemeClasses = 4;
    int eventsPerVideo = 5;
    double noiseSigma = 1.0;
    int minSegmentFrames = 20;
    std::uint64_t seed = 0;

    void validate() const;
    Json toJson() const;
    static GeneratorConfig fromJson(const Json& j);
};

struct VideoSample {
    Matrix frames;                    // N x d
    std::vector<int> eventLabels;     // per frame
    int themeLabel = 0;
    std::vector<double> boundaries;   // seconds, strictly increasing
    double fps = 30.0;

    int numFrames() const { return static_cast<int>(frames.rows()); }
    double lengthSeconds() const { return numFrames() / fps; }

    // Contiguous [begin, end) frame ranges of constant event label.
    std::vector<std::pair<int, int>> segments() const;
};

struct Dataset {
    GeneratorConfig config;
    std::vector<VideoSample> videos;
    Matrix themePrototypes;   // numThemeClasses x d
    Matrix eventPrototypes;   // numEventClasses x d
};

Dataset generateDataset(const GeneratorConfig& cfg);

// Two views of one video differ only by this additive feature noise.
Matrix augment(const Matrix& frames, double sigmaAug, std::uint64_t seed);

Json datasetToJson(const Dataset& ds);
Dataset datasetFromJson(const Json& j);
void saveDataset(const Dataset& ds, const std::string& path);
Dataset loadDataset(const std::string& path);

}  // namespace teg
