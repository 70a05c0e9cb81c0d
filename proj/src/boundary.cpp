#include "teg/boundary.hpp"

#include <algorithm>
#include <cmath>

namespace teg {

Json WindowConfig::toJson() const {
    return Json{{"window_frames", windowFrames},
                {"window_stride", windowStride},
                {"center_offset", centerOffset},
                {"positive_radius_seconds", positiveRadiusSeconds}};
}

WindowConfig WindowConfig::fromJson(const Json& j) {
    requireKnownKeys(
        j, {"window_frames", "window_stride", "center_offset", "positive_radius_seconds"},
        "window config");
    WindowConfig cfg;
    cfg.windowFrames = j.value("window_frames", cfg.windowFrames);
    cfg.windowStride = j.value("window_stride", cfg.windowStride);
    cfg.centerOffset = j.value("center_offset", cfg.centerOffset);
    cfg.positiveRadiusSeconds = j.value("positive_radius_seconds", cfg.positiveRadiusSeconds);
    cfg.validate();
    return cfg;
}

std::vector<LabeledWindow> labelWindows(const VideoSample& video,
                                        const std::vector<double>& boundaries,
                                        const WindowConfig& cfg) {
    cfg.validate();
    std::vector<LabeledWindow> out;
    for (int start = 0; start + cfg.windowFrames <= video.numFrames(); start += cfg.windowStride) {
        const double centerTime = (start + cfg.centerOffset) / video.fps;
        bool positive = false;
        for (double b : boundaries)
            if (std::abs(centerTime - b) < cfg.positiveRadiusSeconds) { positive = true; break; }
        out.push_back({start, positive});
    }
    return out;
}

Vector windowFeatures(const EncoderParams& params, const VideoSample& video, int startFrame,
                      const WindowConfig& cfg) {
    const Matrix feats =
        forwardBackbone(params, video.frames.middleRows(startFrame, cfg.windowFrames));
    const int before = cfg.centerOffset;
    const int after = cfg.windowFrames - cfg.centerOffset;
    Vector out(2 * params.config.featureDim);
    out.head(params.config.featureDim) = feats.topRows(before).colwise().mean().transpose();
    out.tail(params.config.featureDim) = feats.bottomRows(after).colwise().mean().transpose();
    return out;
}

BoundaryHead trainBoundaryHead(const EncoderParams& params,
                               const std::vector<const VideoSample*>& videos,
                               const WindowConfig& cfg, int epochs, double lr, std::uint64_t seed) {
    cfg.validate();
    checkConfig(epochs >= 1 && lr > 0, "boundary head needs epochs >= 1 and lr > 0");

    std::vector<Vector> posFeats, negFeats;
    for (const auto* video : videos) {
        const auto windows = labelWindows(*video, video->boundaries, cfg);
        for (const auto& w : windows) {
            Vector f = windowFeatures(params, *video, w.startFrame, cfg);
            (w.positive ? posFeats : negFeats).push_back(std::move(f));
        }
    }
    if (posFeats.empty() || negFeats.empty())
        throw std::runtime_error("boundary head training needs both positive and negative windows");

    Rng rng = makeRng(seed);
    BoundaryHead head;
    head.weights = Vector::Zero(2 * params.config.featureDim);
    head.bias = 0;

    // Balanced sampling: every pass pairs each positive with a drawn negative
    // (or vice versa for the minority side).
    const std::size_t perEpoch = std::max(posFeats.size(), negFeats.size());
    std::uniform_int_distribution<std::size_t> posDist(0, posFeats.size() - 1);
    std::uniform_int_distribution<std::size_t> negDist(0, negFeats.size() - 1);
    for (int epoch = 0; epoch < epochs; ++epoch) {
        for (std::size_t i = 0; i < perEpoch; ++i) {
            for (int cls = 0; cls < 2; ++cls) {
                const Vector& x = cls == 1 ? posFeats[posDist(rng)] : negFeats[negDist(rng)];
                const double y = cls;
                const double p = 1.0 / (1.0 + std::exp(-(head.weights.dot(x) + head.bias)));
                head.weights -= lr * (p - y) * x;
                head.bias -= lr * (p - y);
            }
        }
    }
    return head;
}

DetectionSet detect(const BoundaryHead& head, const EncoderParams& params, const VideoSample& video,
                    const WindowConfig& cfg) {
    DetectionSet out;
    double runSum = 0;
    int runLen = 0;
    for (int start = 0; start + cfg.windowFrames <= video.numFrames(); start += cfg.windowStride) {
        const Vector f = windowFeatures(params, video, start, cfg);
        const bool positive = head.weights.dot(f) + head.bias > 0;
        if (positive) {
            runSum += (start + cfg.centerOffset) / video.fps;
            ++runLen;
        } else if (runLen > 0) {
            out.timestamps.push_back(runSum / runLen);
            runSum = 0;
            runLen = 0;
        }
    }
    if (runLen > 0) out.timestamps.push_back(runSum / runLen);
    std::sort(out.timestamps.begin(), out.timestamps.end());
    return out;
}

namespace {

F1Result scoreAgainstSet(const std::vector<double>& detections, const std::vector<double>& gt,
                         double threshold) {
    F1Result res;
    std::vector<bool> used(gt.size(), false);
    int tp = 0;
    for (double det : detections) {
        int best = -1;
        double bestDist = threshold;
        for (std::size_t g = 0; g < gt.size(); ++g) {
            if (used[g]) continue;
            const double dist = std::abs(det - gt[g]);
            if (dist < bestDist) {
                bestDist = dist;
                best = static_cast<int>(g);
            }
        }
        if (best >= 0) {
            used[static_cast<std::size_t>(best)] = true;
            ++tp;
        }
    }
    if (detections.empty() && gt.empty()) {
        res.precision = res.recall = res.f1 = 1.0;
        return res;
    }
    res.precision = detections.empty() ? 0.0 : static_cast<double>(tp) / detections.size();
    res.recall = gt.empty() ? 0.0 : static_cast<double>(tp) / gt.size();
    res.f1 = (res.precision + res.recall) == 0
                 ? 0.0
                 : 2 * res.precision * res.recall / (res.precision + res.recall);
    return res;
}

}  // namespace

F1Result f1Score(const DetectionSet& detections, const BoundaryAnnotation& annotation,
                 double relDis) {
    checkConfig(relDis > 0, "relDis must be > 0");
    checkContract(!annotation.sets.empty(), "annotation has no boundary sets");
    const double threshold = relDis * annotation.videoLengthSeconds;

    F1Result best;
    best.f1 = -1;
    for (std::size_t s = 0; s < annotation.sets.size(); ++s) {
        F1Result r = scoreAgainstSet(detections.timestamps, annotation.sets[s], threshold);
        if (r.f1 > best.f1) {
            best = r;
            best.matchedSetIndex = static_cast<int>(s);
        }
    }
    return best;
}

int selectTrainingAnnotation(const BoundaryAnnotation& annotation, double relDis) {
    checkContract(!annotation.sets.empty(), "annotation has no boundary sets");
    if (annotation.sets.size() == 1) return 0;
    const double threshold = relDis * annotation.videoLengthSeconds;
    int best = 0;
    double bestScore = -1;
    for (std::size_t s = 0; s < annotation.sets.size(); ++s) {
        double sum = 0;
        for (std::size_t o = 0; o < annotation.sets.size(); ++o) {
            if (o == s) continue;
            sum += scoreAgainstSet(annotation.sets[s], annotation.sets[o], threshold).f1;
        }
        const double mean = sum / static_cast<double>(annotation.sets.size() - 1);
        if (mean > bestScore) {
            bestScore = mean;
            best = static_cast<int>(s);
        }
    }
    return best;
}

}  // namespace teg
