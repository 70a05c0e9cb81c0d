#include "teg/probes.hpp"

#include <algorithm>
#include <numeric>

namespace teg {

Vector extractFeatures(const EncoderParams& params, const VideoSample& video, int begin, int end) {
    checkContract(begin >= 0 && end <= video.numFrames() && begin < end,
                  "empty or out-of-range frame span");
    const Matrix span = video.frames.middleRows(begin, end - begin);
    const Matrix feats = forwardBackbone(params, span);
    return feats.colwise().mean().transpose();
}

namespace {

int predictClass(const Matrix& w, const Vector& b, const Vector& x) {
    Index best;
    (w.transpose() * x + b).maxCoeff(&best);
    return static_cast<int>(best);
}

}  // namespace

ProbeResult linearProbe(const Matrix& features, const std::vector<int>& labels,
                        const ProbeConfig& cfg) {
    cfg.validate();
    checkContract(features.rows() == static_cast<Index>(labels.size()),
                  "feature/label count mismatch");
    const int numClasses = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;

    const Index total = features.rows();
    std::vector<int> order(static_cast<std::size_t>(total));
    std::iota(order.begin(), order.end(), 0);
    Rng rng = makeRng(cfg.seed);
    std::shuffle(order.begin(), order.end(), rng);
    const Index valCount = std::max<Index>(1, static_cast<Index>(cfg.valFraction * total));
    checkContract(valCount < total, "not enough samples to split");
    std::vector<int> valIdx(order.begin(), order.begin() + valCount);
    std::vector<int> trainIdx(order.begin() + valCount, order.end());

    {
        std::vector<bool> present(static_cast<std::size_t>(numClasses), false);
        for (int i : trainIdx) present[static_cast<std::size_t>(labels[i])] = true;
        if (std::count(present.begin(), present.end(), true) < 2)
            throw ProbeError("train split is degenerate: fewer than 2 classes present");
    }

    ProbeResult res;
    res.numClasses = numClasses;
    res.weights = Matrix::Zero(features.cols(), numClasses);
    res.bias = Vector::Zero(numClasses);
    {
        Rng initRng = makeRng(deriveSeed(cfg.seed, 2));
        std::uniform_real_distribution<double> dist(-0.01, 0.01);
        for (Index r = 0; r < res.weights.rows(); ++r)
            for (Index c = 0; c < res.weights.cols(); ++c) res.weights(r, c) = dist(initRng);
    }

    const Index d = features.cols();
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(trainIdx.begin(), trainIdx.end(), rng);
        for (std::size_t pos = 0; pos < trainIdx.size(); pos += cfg.batch) {
            const std::size_t bsz = std::min<std::size_t>(cfg.batch, trainIdx.size() - pos);
            Matrix gradW = Matrix::Zero(d, numClasses);
            Vector gradB = Vector::Zero(numClasses);
            for (std::size_t k = 0; k < bsz; ++k) {
                const int i = trainIdx[pos + k];
                const Vector x = features.row(i).transpose();
                Vector logits = res.weights.transpose() * x + res.bias;
                logits.array() -= logits.maxCoeff();
                Vector p = logits.array().exp();
                p /= p.sum();
                p(labels[static_cast<std::size_t>(i)]) -= 1.0;
                gradW += x * p.transpose();
                gradB += p;
            }
            res.weights -= (cfg.lr / bsz) * gradW;
            res.bias -= (cfg.lr / bsz) * gradB;
        }
    }

    auto accuracy = [&](const std::vector<int>& idx) {
        if (idx.empty()) return 0.0;
        int hits = 0;
        for (int i : idx)
            if (predictClass(res.weights, res.bias, features.row(i).transpose()) ==
                labels[static_cast<std::size_t>(i)])
                ++hits;
        return static_cast<double>(hits) / idx.size();
    };
    res.trainAccuracy = accuracy(trainIdx);
    res.valAccuracy = accuracy(valIdx);
    return res;
}

ProbeResult runProbe(const EncoderParams& params, const Dataset& dataset, const ProbeConfig& cfg) {
    std::vector<Vector> feats;
    std::vector<int> labels;
    for (const auto& video : dataset.videos) {
        if (cfg.task == ProbeTask::Event) {
            for (const auto& [begin, end] : video.segments()) {
                feats.push_back(extractFeatures(params, video, begin, end));
                labels.push_back(video.eventLabels[static_cast<std::size_t>(begin)]);
            }
        } else {
            // clip-level protocol: each of the uniform spans is one example,
            // so within-video feature drift costs sequence accuracy
            const int clips = cfg.sequenceClips;
            const int per = video.numFrames() / clips;
            checkContract(per >= 1, "video too short for sequence clips");
            for (int i = 0; i < clips; ++i) {
                const int end = (i + 1 == clips) ? video.numFrames() : (i + 1) * per;
                feats.push_back(extractFeatures(params, video, i * per, end));
                labels.push_back(video.themeLabel);
            }
        }
    }
    Matrix x(static_cast<Index>(feats.size()), feats.front().size());
    for (std::size_t i = 0; i < feats.size(); ++i) x.row(static_cast<Index>(i)) = feats[i].transpose();
    return linearProbe(x, labels, cfg);
}

Matrix similarityMatrix(const EncoderParams& params, const VideoSample& video, int clips) {
    checkContract(clips >= 1 && video.numFrames() >= clips, "video too short for clip count");
    const int per = video.numFrames() / clips;
    Matrix pooled(clips, params.config.featureDim);
    for (int i = 0; i < clips; ++i) {
        const Vector f = extractFeatures(params, video, i * per, (i + 1) * per);
        pooled.row(i) = f.transpose() / f.norm();
    }
    return pooled * pooled.transpose();
}

double meanOffDiagonal(const Matrix& m) {
    checkContract(m.rows() == m.cols() && m.rows() >= 2, "need a square matrix of size >= 2");
    double sum = 0;
    for (Index r = 0; r < m.rows(); ++r)
        for (Index c = 0; c < m.cols(); ++c)
            if (r != c) sum += m(r, c);
    return sum / static_cast<double>(m.rows() * (m.rows() - 1));
}

}  // namespace teg
