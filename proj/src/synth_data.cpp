#include "teg/synth_data.hpp"

#include <algorithm>
#include <fstream>

#include "teg/rng.hpp"

namespace teg {

void GeneratorConfig::validate() const {
    checkConfig(numVideos >= 1, "numVideos must be >= 1");
    checkConfig(framesPerVideo >= 1, "framesPerVideo must be >= 1");
    checkConfig(fps > 0, "fps must be > 0");
    checkConfig(featureDim >= 1, "featureDim must be >= 1");
    checkConfig(numEventClasses >= 1, "numEventClasses must be >= 1");
    checkConfig(numThemeClasses >= 1, "numThemeClasses must be >= 1");
    checkConfig(eventsPerVideo >= 1, "eventsPerVideo must be >= 1");
    checkConfig(noiseSigma >= 0, "noiseSigma must be >= 0");
    checkConfig(minSegmentFrames >= 1, "minSegmentFrames must be >= 1");
    checkConfig(static_cast<long>(eventsPerVideo) * minSegmentFrames <= framesPerVideo,
                "eventsPerVideo * minSegmentFrames exceeds framesPerVideo");
    // Consecutive segments must change label, which needs at least two classes.
    checkConfig(eventsPerVideo == 1 || numEventClasses >= 2,
                "eventsPerVideo > 1 requires numEventClasses >= 2");
}

Json GeneratorConfig::toJson() const {
    return Json{{"num_videos", numVideos},
                {"frames_per_video", framesPerVideo},
                {"fps", fps},
                {"feature_dim", featureDim},
                {"num_event_classes", numEventClasses},
                {"num_theme_classes", numThemeClasses},
                {"events_per_video", eventsPerVideo},
                {"noise_sigma", noiseSigma},
                {"min_segment_frames", minSegmentFrames},
                {"seed", seed}};
}

GeneratorConfig GeneratorConfig::fromJson(const Json& j) {
    requireKnownKeys(j,
                     {"num_videos", "frames_per_video", "fps", "feature_dim", "num_event_classes",
                      "num_theme_classes", "events_per_video", "noise_sigma", "min_segment_frames",
                      "seed"},
                     "generator config");
    GeneratorConfig cfg;
    cfg.numVideos = j.value("num_videos", cfg.numVideos);
    cfg.framesPerVideo = j.value("frames_per_video", cfg.framesPerVideo);
    cfg.fps = j.value("fps", cfg.fps);
    cfg.featureDim = j.value("feature_dim", cfg.featureDim);
    cfg.numEventClasses = j.value("num_event_classes", cfg.numEventClasses);
    cfg.numThemeClasses = j.value("num_theme_classes", cfg.numThemeClasses);
    cfg.eventsPerVideo = j.value("events_per_video", cfg.eventsPerVideo);
    cfg.noiseSigma = j.value("noise_sigma", cfg.noiseSigma);
    cfg.minSegmentFrames = j.value("min_segment_frames", cfg.minSegmentFrames);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.validate();
    return cfg;
}

std::vector<std::pair<int, int>> VideoSample::segments() const {
    std::vector<std::pair<int, int>> out;
    const int n = numFrames();
    int begin = 0;
    for (int t = 1; t <= n; ++t) {
        if (t == n || eventLabels[t] != eventLabels[begin]) {
            out.emplace_back(begin, t);
            begin = t;
        }
    }
    return out;
}

namespace {

// Uniform partition of n frames into k segments, rejecting partitions with a
// segment shorter than minLen.
std::vector<int> drawSegmentLengths(int n, int k, int minLen, Rng& rng) {
    if (k == 1) return {n};
    std::uniform_int_distribution<int> cutDist(1, n - 1);
    std::vector<int> cuts(k - 1);
    for (int attempt = 0; attempt < 100000; ++attempt) {
        for (auto& c : cuts) c = cutDist(rng);
        std::sort(cuts.begin(), cuts.end());
        std::vector<int> lens;
        lens.reserve(k);
        int prev = 0;
        bool ok = true;
        for (int c : cuts) {
            lens.push_back(c - prev);
            prev = c;
        }
        lens.push_back(n - prev);
        for (int len : lens)
            if (len < minLen) { ok = false; break; }
        if (ok) return lens;
    }
    throw ConfigError("could not partition video into segments of the requested minimum length");
}

Matrix drawPrototypes(int count, int dim, Rng& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix protos(count, dim);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
    for (Index r = 0; r < protos.rows(); ++r)
        for (Index c = 0; c < protos.cols(); ++c) protos(r, c) = scale * gauss(rng);
    return protos;
}

}  // namespace

Dataset generateDataset(const GeneratorConfig& cfg) {
    cfg.validate();
    Rng rng = makeRng(cfg.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    Dataset ds;
    ds.config = cfg;
    ds.themePrototypes = drawPrototypes(cfg.numThemeClasses, cfg.featureDim, rng);
    ds.eventPrototypes = drawPrototypes(cfg.numEventClasses, cfg.featureDim, rng);

    std::uniform_int_distribution<int> themeDist(0, cfg.numThemeClasses - 1);
    std::uniform_int_distribution<int> eventDist(0, cfg.numEventClasses - 1);

    ds.videos.reserve(cfg.numVideos);
    for (int v = 0; v < cfg.numVideos; ++v) {
        VideoSample sample;
        sample.fps = cfg.fps;
        sample.themeLabel = themeDist(rng);

        const auto lens =
            drawSegmentLengths(cfg.framesPerVideo, cfg.eventsPerVideo, cfg.minSegmentFrames, rng);

        std::vector<int> segClasses(lens.size());
        for (std::size_t s = 0; s < lens.size(); ++s) {
            int cls = eventDist(rng);
            while (s > 0 && cls == segClasses[s - 1]) cls = eventDist(rng);
            segClasses[s] = cls;
        }

        sample.frames.resize(cfg.framesPerVideo, cfg.featureDim);
        sample.eventLabels.resize(cfg.framesPerVideo);
        int t = 0;
        for (std::size_t s = 0; s < lens.size(); ++s) {
            if (s > 0) sample.boundaries.push_back(t / cfg.fps);
            for (int i = 0; i < lens[s]; ++i, ++t) {
                sample.eventLabels[t] = segClasses[s];
                for (int c = 0; c < cfg.featureDim; ++c)
                    sample.frames(t, c) = ds.themePrototypes(sample.themeLabel, c) +
                                          ds.eventPrototypes(segClasses[s], c) +
                                          cfg.noiseSigma * gauss(rng);
            }
        }
        ds.videos.push_back(std::move(sample));
    }
    return ds;
}

Matrix augment(const Matrix& frames, double sigmaAug, std::uint64_t seed) {
    checkContract(sigmaAug >= 0, "sigmaAug must be >= 0");
    if (sigmaAug == 0) return frames;
    Rng rng = makeRng(seed);
    std::normal_distribution<double> gauss(0.0, sigmaAug);
    Matrix out = frames;
    for (Index r = 0; r < out.rows(); ++r)
        for (Index c = 0; c < out.cols(); ++c) out(r, c) += gauss(rng);
    return out;
}

Json datasetToJson(const Dataset& ds) {
    Json videos = Json::array();
    for (const auto& v : ds.videos) {
        videos.push_back(Json{{"frames", toJson(v.frames)},
                              {"event_labels", v.eventLabels},
                              {"theme_label", v.themeLabel},
                              {"boundaries", v.boundaries},
                              {"fps", v.fps}});
    }
    return Json{{"format", "teg-dataset-v1"},
                {"config", ds.config.toJson()},
                {"theme_prototypes", toJson(ds.themePrototypes)},
                {"event_prototypes", toJson(ds.eventPrototypes)},
                {"videos", std::move(videos)}};
}

Dataset datasetFromJson(const Json& j) {
    if (j.value("format", "") != "teg-dataset-v1")
        throw ConfigError("unrecognized dataset format tag");
    Dataset ds;
    ds.config = GeneratorConfig::fromJson(j.at("config"));
    ds.themePrototypes = matrixFromJson(j.at("theme_prototypes"));
    ds.eventPrototypes = matrixFromJson(j.at("event_prototypes"));
    for (const auto& vj : j.at("videos")) {
        VideoSample v;
        v.frames = matrixFromJson(vj.at("frames"));
        v.eventLabels = vj.at("event_labels").get<std::vector<int>>();
        v.themeLabel = vj.at("theme_label").get<int>();
        v.boundaries = vj.at("boundaries").get<std::vector<double>>();
        v.fps = vj.at("fps").get<double>();
        ds.videos.push_back(std::move(v));
    }
    return ds;
}

void saveDataset(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open dataset file for writing: " + path);
    out << datasetToJson(ds).dump();
}

Dataset loadDataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open dataset file: " + path);
    Json j;
    in >> j;
    return datasetFromJson(j);
}

}  // namespace teg
