#include "teg/experiment.hpp"

#include <cmath>
#include <fstream>

namespace teg {

Json probeConfigToJson(const ProbeConfig& cfg) {
    return Json{{"epochs", cfg.epochs},
                {"lr", cfg.lr},
                {"batch", cfg.batch},
                {"seed", cfg.seed},
                {"val_fraction", cfg.valFraction},
                {"sequence_clips", cfg.sequenceClips}};
}

ProbeConfig probeConfigFromJson(const Json& j) {
    requireKnownKeys(j, {"epochs", "lr", "batch", "seed", "val_fraction", "sequence_clips"},
                     "probe config");
    ProbeConfig cfg;
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.lr = j.value("lr", cfg.lr);
    cfg.batch = j.value("batch", cfg.batch);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.valFraction = j.value("val_fraction", cfg.valFraction);
    cfg.sequenceClips = j.value("sequence_clips", cfg.sequenceClips);
    cfg.validate();
    return cfg;
}

Json ExperimentConfig::toJson() const {
    return Json{{"generator", generator.toJson()},
                {"train", train.toJson()},
                {"probe", probeConfigToJson(probe)},
                {"window", window.toJson()},
                {"rel_dis", relDis},
                {"boundary_head_epochs", boundaryHeadEpochs},
                {"boundary_head_lr", boundaryHeadLr},
                {"seed", seed}};
}

ExperimentConfig ExperimentConfig::fromJson(const Json& j) {
    requireKnownKeys(j,
                     {"generator", "train", "probe", "window", "rel_dis", "boundary_head_epochs",
                      "boundary_head_lr", "seed"},
                     "experiment config");
    ExperimentConfig cfg;
    if (j.contains("generator")) cfg.generator = GeneratorConfig::fromJson(j.at("generator"));
    if (j.contains("train")) cfg.train = TrainConfig::fromJson(j.at("train"));
    if (j.contains("probe")) cfg.probe = probeConfigFromJson(j.at("probe"));
    if (j.contains("window")) cfg.window = WindowConfig::fromJson(j.at("window"));
    cfg.relDis = j.value("rel_dis", cfg.relDis);
    cfg.boundaryHeadEpochs = j.value("boundary_head_epochs", cfg.boundaryHeadEpochs);
    cfg.boundaryHeadLr = j.value("boundary_head_lr", cfg.boundaryHeadLr);
    cfg.seed = j.value("seed", cfg.seed);
    checkConfig(cfg.relDis > 0, "rel_dis must be > 0");
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    Json j;
    try {
        in >> j;
    } catch (const Json::exception& e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    return fromJson(j);
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a64(toJson().dump()); }

void ExperimentConfig::setSeed(std::uint64_t s) {
    seed = s;
    generator.seed = s;
    train.seed = s;
    probe.seed = s;
}

void ExperimentConfig::applyPreset(const std::string& name) {
    if (name == "teg-ps")
        train.loss.alpha = 0.0;
    else if (name == "teg-fg")
        train.loss.alpha = 0.9;
    else
        throw ConfigError("unknown preset '" + name + "' (expected teg-ps or teg-fg)");
}

GradCheckReport runGradCheck(std::uint64_t seed, int coords) {
    EncoderConfig enc;
    enc.inputDim = 5;
    enc.hiddenDim = 6;
    enc.featureDim = 5;
    enc.embedDim = 4;
    enc.kernel = 3;
    EncoderParams params = initEncoder(enc, seed);

    LossConfig loss;
    loss.tau = 0.1;
    loss.alpha = 0.6;
    loss.agg.shortGroups = 2;
    loss.agg.longGroups = 4;

    Rng rng = makeRng(deriveSeed(seed, 7));
    std::normal_distribution<double> gauss(0.0, 1.0);
    const int batchSize = 3, shortT = 4, longT = 8;
    std::vector<ClipViews> batch(batchSize);
    for (auto& cv : batch) {
        cv.shortFrames.resize(shortT, enc.inputDim);
        cv.longFrames.resize(longT, enc.inputDim);
        for (Index r = 0; r < cv.shortFrames.rows(); ++r)
            for (Index c = 0; c < cv.shortFrames.cols(); ++c) cv.shortFrames(r, c) = gauss(rng);
        for (Index r = 0; r < cv.longFrames.rows(); ++r)
            for (Index c = 0; c < cv.longFrames.cols(); ++c) cv.longFrames(r, c) = gauss(rng);
        // short clip sits inside the long one, stride 2 vs 3
        ClipSpec shortClip{2, shortT, 2}, longClip{0, longT, 3};
        cv.shortIdx = frameIndices(shortClip);
        cv.longIdx = frameIndices(longClip);
    }

    EncoderParams grads = zerosLike(params);
    batchLossAndGrads(params, batch, loss, &grads);
    const Vector analytic = grads.flatten();

    Vector flat = params.flatten();
    const double h = 1e-5;
    auto evalAt = [&](const Vector& theta) {
        EncoderParams p = params;
        p.unflatten(theta);
        return batchLossAndGrads(p, batch, loss, nullptr).total;
    };

    std::uniform_int_distribution<Index> coordDist(0, flat.size() - 1);
    GradCheckReport report;
    report.coordsChecked = coords;
    for (int i = 0; i < coords; ++i) {
        const Index c = coordDist(rng);
        Vector plus = flat, minus = flat;
        plus(c) += h;
        minus(c) -= h;
        const double fd = (evalAt(plus) - evalAt(minus)) / (2 * h);
        const double denom = std::max({std::abs(fd), std::abs(analytic(c)), 1e-4});
        report.maxRelError = std::max(report.maxRelError, std::abs(fd - analytic(c)) / denom);
    }
    return report;
}

GeneratorConfig benchmarkGenerator(std::uint64_t seed) {
    GeneratorConfig cfg;
    cfg.numVideos = 200;
    cfg.framesPerVideo = 300;
    cfg.fps = 30.0;
    cfg.featureDim = 16;
    cfg.numEventClasses = 5;
    cfg.numThemeClasses = 4;
    cfg.eventsPerVideo = 5;
    cfg.noiseSigma = 1.0;
    cfg.minSegmentFrames = 20;
    cfg.seed = seed;
    return cfg;
}

TrainConfig benchmarkTrain(double alpha, std::uint64_t seed) {
    TrainConfig cfg;
    cfg.loss.alpha = alpha;
    cfg.seed = seed;
    // the directional trends need a feature bottleneck: with 3 output dims the
    // encoder must choose between event and theme directions, so the alpha
    // setting visibly shifts what the probes can read out
    cfg.encoder.featureDim = 3;
    cfg.batchSize = 64;
    cfg.epochs = 100;
    return cfg;
}

BenchmarkScores probeScores(const EncoderParams& params, const Dataset& dataset,
                            const ProbeConfig& base) {
    BenchmarkScores scores;
    ProbeConfig cfg = base;
    cfg.task = ProbeTask::Event;
    scores.eventAccuracy = runProbe(params, dataset, cfg).valAccuracy;
    cfg.task = ProbeTask::Sequence;
    scores.sequenceAccuracy = runProbe(params, dataset, cfg).valAccuracy;
    return scores;
}

BenchmarkScores benchmarkProbeScores(double alpha, std::uint64_t seed) {
    const Dataset dataset = generateDataset(benchmarkGenerator(seed));
    const TrainResult trained = pretrain(dataset, benchmarkTrain(alpha, seed));
    ProbeConfig probe;
    probe.seed = seed;
    return probeScores(trained.params, dataset, probe);
}

double benchmarkBoundaryF1(const EncoderParams& params, const Dataset& dataset,
                           const WindowConfig& window, double relDis, int headEpochs,
                           double headLr, std::uint64_t seed) {
    const std::size_t total = dataset.videos.size();
    checkContract(total >= 4, "dataset too small for a boundary train/eval split");
    const std::size_t trainCount = total * 3 / 4;

    std::vector<const VideoSample*> trainVideos;
    for (std::size_t i = 0; i < trainCount; ++i) trainVideos.push_back(&dataset.videos[i]);

    const BoundaryHead head =
        trainBoundaryHead(params, trainVideos, window, headEpochs, headLr, seed);

    double sum = 0;
    int count = 0;
    for (std::size_t i = trainCount; i < total; ++i) {
        const auto& video = dataset.videos[i];
        const DetectionSet det = detect(head, params, video, window);
        BoundaryAnnotation ann;
        ann.sets = {video.boundaries};
        ann.videoLengthSeconds = video.lengthSeconds();
        sum += f1Score(det, ann, relDis).f1;
        ++count;
    }
    return sum / count;
}

}  // namespace teg
