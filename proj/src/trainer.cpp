#include "teg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace teg {

void TrainConfig::validate() const {
    checkConfig(batchSize >= 1, "batchSize must be >= 1");
    checkConfig(epochs >= 1, "epochs must be >= 1");
    checkConfig(baseLr > 0, "baseLr must be > 0");
    checkConfig(warmupEpochs >= 0 && warmupEpochs <= epochs, "warmupEpochs must lie in [0, epochs]");
    checkConfig(momentum >= 0 && momentum < 1, "momentum must lie in [0, 1)");
    checkConfig(longT >= 1 && longStride >= 1 && shortT >= 1 && shortStride >= 1,
                "clip geometry values must be >= 1");
    checkConfig(sigmaAug >= 0, "sigmaAug must be >= 0");
    loss.validate();
    encoder.validate();
    checkConfig(shortT % loss.agg.shortGroups == 0, "n must divide shortT");
    checkConfig(longT % loss.agg.longGroups == 0, "m must divide longT");
}

Json TrainConfig::toJson() const {
    return Json{{"batch_size", batchSize},
                {"epochs", epochs},
                {"base_lr", baseLr},
                {"warmup_epochs", warmupEpochs},
                {"momentum", momentum},
                {"sampling_mode", samplingModeName(mode)},
                {"long_t", longT},
                {"long_stride", longStride},
                {"short_t", shortT},
                {"short_stride", shortStride},
                {"tau", loss.tau},
                {"alpha", loss.alpha},
                {"short_groups", loss.agg.shortGroups},
                {"long_groups", loss.agg.longGroups},
                {"sigma_aug", sigmaAug},
                {"seed", seed},
                {"encoder", encoder.toJson()}};
}

TrainConfig TrainConfig::fromJson(const Json& j) {
    requireKnownKeys(j,
                     {"batch_size", "epochs", "base_lr", "warmup_epochs", "momentum",
                      "sampling_mode", "long_t", "long_stride", "short_t", "short_stride", "tau",
                      "alpha", "short_groups", "long_groups", "sigma_aug", "seed", "encoder"},
                     "train config");
    TrainConfig cfg;
    cfg.batchSize = j.value("batch_size", cfg.batchSize);
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.baseLr = j.value("base_lr", cfg.baseLr);
    cfg.warmupEpochs = j.value("warmup_epochs", cfg.warmupEpochs);
    cfg.momentum = j.value("momentum", cfg.momentum);
    if (j.contains("sampling_mode")) cfg.mode = samplingModeFromString(j.at("sampling_mode"));
    cfg.longT = j.value("long_t", cfg.longT);
    cfg.longStride = j.value("long_stride", cfg.longStride);
    cfg.shortT = j.value("short_t", cfg.shortT);
    cfg.shortStride = j.value("short_stride", cfg.shortStride);
    cfg.loss.tau = j.value("tau", cfg.loss.tau);
    cfg.loss.alpha = j.value("alpha", cfg.loss.alpha);
    cfg.loss.agg.shortGroups = j.value("short_groups", cfg.loss.agg.shortGroups);
    cfg.loss.agg.longGroups = j.value("long_groups", cfg.loss.agg.longGroups);
    cfg.sigmaAug = j.value("sigma_aug", cfg.sigmaAug);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("encoder")) cfg.encoder = EncoderConfig::fromJson(j.at("encoder"));
    cfg.validate();
    return cfg;
}

double lrAt(long step, double totalSteps, double warmupSteps, double baseLr) {
    if (warmupSteps > 0 && step < warmupSteps)
        return baseLr * (step + 1) / warmupSteps;
    const double progress = (step - warmupSteps) / (totalSteps - warmupSteps);
    return baseLr * 0.5 * (1.0 + std::cos(M_PI * progress));
}

void sgdStep(EncoderParams& params, const EncoderParams& grads, EncoderParams& velocity, double lr,
             double mu) {
    auto* g = const_cast<EncoderParams*>(&grads);
    std::vector<double*> pd, gd, vd;
    std::vector<Index> sizes;
    params.forEachTensor([&](auto& t) { pd.push_back(t.data()); sizes.push_back(t.size()); });
    g->forEachTensor([&](auto& t) { gd.push_back(t.data()); });
    velocity.forEachTensor([&](auto& t) { vd.push_back(t.data()); });
    checkContract(pd.size() == gd.size() && pd.size() == vd.size(), "tensor count mismatch");
    for (std::size_t i = 0; i < pd.size(); ++i) {
        for (Index k = 0; k < sizes[i]; ++k) {
            vd[i][k] = mu * vd[i][k] + gd[i][k];
            pd[i][k] -= lr * vd[i][k];
        }
    }
}

Pretrainer::Pretrainer(const Dataset& dataset, const TrainConfig& cfg)
    : dataset_(&dataset), cfg_(cfg) {
    cfg_.validate();
    checkConfig(!dataset.videos.empty(), "dataset is empty");
    checkConfig(cfg_.batchSize <= static_cast<int>(dataset.videos.size()),
                "batchSize exceeds dataset size");
    params_ = initEncoder(cfg_.encoder, cfg_.seed);
    velocity_ = zerosLike(params_);
    rng_ = makeRng(deriveSeed(cfg_.seed, 1));
    const long n = static_cast<long>(dataset.videos.size());
    stepsPerEpoch_ = (n + cfg_.batchSize - 1) / cfg_.batchSize;
    totalSteps_ = stepsPerEpoch_ * cfg_.epochs;
}

void Pretrainer::startEpochIfNeeded() {
    if (epochPos_ < epochOrder_.size()) return;
    epochOrder_.resize(dataset_->videos.size());
    std::iota(epochOrder_.begin(), epochOrder_.end(), 0);
    std::shuffle(epochOrder_.begin(), epochOrder_.end(), rng_);
    epochPos_ = 0;
}

namespace {

// Per-video forward state for one training step.
struct ViewState {
    BackboneCache shortBackbone, longBackbone;
    HeadCache shortFineHead, longFineHead, shortPersHead, longPersHead;
    AggregateCache shortFineAgg, longFineAgg, shortPersAgg, longPersAgg;
    EmbeddingBlock shortFine, longFine, shortPers, longPers;
    // loss gradients w.r.t. the aggregated blocks
    Matrix dShortFine, dLongFine, dShortPers, dLongPers;
};

Matrix gatherFrames(const Matrix& frames, const std::vector<int>& idx) {
    Matrix out(static_cast<Index>(idx.size()), frames.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Index>(i)) = frames.row(idx[i]);
    return out;
}

}  // namespace

LossBreakdown batchLossAndGrads(const EncoderParams& params, const std::vector<ClipViews>& batch,
                                const LossConfig& loss, EncoderParams* grads) {
    loss.validate();
    checkContract(!batch.empty(), "empty batch");
    const int embedDim = params.config.embedDim;

    std::vector<ViewState> views(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
        auto& vs = views[b];
        const auto& cv = batch[b];
        const Matrix longFeat = forwardBackbone(params, cv.longFrames, vs.longBackbone);
        const Matrix shortFeat = forwardBackbone(params, cv.shortFrames, vs.shortBackbone);

        const Matrix longFineEmb = project(params, Head::Fine, longFeat, vs.longFineHead);
        const Matrix shortFineEmb = project(params, Head::Fine, shortFeat, vs.shortFineHead);
        const Matrix longPersEmb = project(params, Head::Persistent, longFeat, vs.longPersHead);
        const Matrix shortPersEmb = project(params, Head::Persistent, shortFeat, vs.shortPersHead);

        vs.longFine = aggregate(longFineEmb, cv.longIdx, loss.agg.longGroups, vs.longFineAgg);
        vs.longFine.source = ClipSource::Long;
        vs.shortFine = aggregate(shortFineEmb, cv.shortIdx, loss.agg.shortGroups, vs.shortFineAgg);
        vs.longPers = aggregate(longPersEmb, cv.longIdx, 1, vs.longPersAgg);
        vs.longPers.source = ClipSource::Long;
        vs.longPers.space = EmbedSpace::Persistent;
        vs.shortPers = aggregate(shortPersEmb, cv.shortIdx, 1, vs.shortPersAgg);
        vs.shortPers.space = EmbedSpace::Persistent;

        vs.dShortFine = Matrix::Zero(vs.shortFine.groups(), embedDim);
        vs.dLongFine = Matrix::Zero(vs.longFine.groups(), embedDim);
        vs.dShortPers = Matrix::Zero(1, embedDim);
        vs.dLongPers = Matrix::Zero(1, embedDim);
    }

    const double alpha = loss.alpha;
    const double invB = 1.0 / static_cast<double>(batch.size());
    double sumFine = 0, sumPers = 0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        std::vector<const EmbeddingBlock*> fineNeg, persNeg;
        std::vector<std::size_t> negIds;
        for (std::size_t o = 0; o < batch.size(); ++o) {
            if (o == b) continue;
            fineNeg.push_back(&views[o].longFine);
            persNeg.push_back(&views[o].longPers);
            negIds.push_back(o);
        }
        auto fine = fineLoss(views[b].shortFine, views[b].longFine, fineNeg, loss.tau);
        auto pers = persistentLoss(views[b].shortPers, views[b].longPers, persNeg, loss.tau);
        sumFine += fine.loss;
        sumPers += pers.loss;

        if (grads) {
            views[b].dShortFine += alpha * invB * fine.gradAnchor;
            views[b].dLongFine += alpha * invB * fine.gradPositive;
            views[b].dShortPers += (1 - alpha) * invB * pers.gradAnchor;
            views[b].dLongPers += (1 - alpha) * invB * pers.gradPositive;
            for (std::size_t k = 0; k < negIds.size(); ++k) {
                views[negIds[k]].dLongFine += alpha * invB * fine.gradNegatives[k];
                views[negIds[k]].dLongPers += (1 - alpha) * invB * pers.gradNegatives[k];
            }
        }
    }

    if (grads) {
        for (auto& vs : views) {
            const Matrix dShortFineEmb =
                backwardAggregate(vs.shortFine, vs.shortFineAgg, vs.dShortFine);
            const Matrix dLongFineEmb = backwardAggregate(vs.longFine, vs.longFineAgg, vs.dLongFine);
            const Matrix dShortPersEmb =
                backwardAggregate(vs.shortPers, vs.shortPersAgg, vs.dShortPers);
            const Matrix dLongPersEmb = backwardAggregate(vs.longPers, vs.longPersAgg, vs.dLongPers);

            Matrix dShortFeat =
                backwardProject(params, Head::Fine, vs.shortFineHead, dShortFineEmb, *grads);
            dShortFeat +=
                backwardProject(params, Head::Persistent, vs.shortPersHead, dShortPersEmb, *grads);
            Matrix dLongFeat =
                backwardProject(params, Head::Fine, vs.longFineHead, dLongFineEmb, *grads);
            dLongFeat +=
                backwardProject(params, Head::Persistent, vs.longPersHead, dLongPersEmb, *grads);

            backwardBackbone(params, vs.shortBackbone, dShortFeat, *grads);
            backwardBackbone(params, vs.longBackbone, dLongFeat, *grads);
        }
    }

    return totalLoss(sumFine * invB, sumPers * invB, alpha);
}

StepMetrics Pretrainer::step() {
    if (done()) throw StateError("training already finished");
    startEpochIfNeeded();

    const std::size_t remaining = epochOrder_.size() - epochPos_;
    const std::size_t batch = std::min<std::size_t>(remaining, cfg_.batchSize);
    std::vector<int> videoIds(epochOrder_.begin() + epochPos_,
                              epochOrder_.begin() + epochPos_ + batch);
    epochPos_ += batch;

    std::vector<ClipViews> clipViews(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        const VideoSample& video = dataset_->videos[static_cast<std::size_t>(videoIds[b])];
        const ClipPair pair = sampleClipPair(video.numFrames(), cfg_.mode, cfg_.longT,
                                             cfg_.longStride, cfg_.shortT, cfg_.shortStride, rng_);
        clipViews[b].longIdx = frameIndices(pair.longClip);
        clipViews[b].shortIdx = frameIndices(pair.shortClip);
        clipViews[b].longFrames =
            augment(gatherFrames(video.frames, clipViews[b].longIdx), cfg_.sigmaAug, rng_());
        clipViews[b].shortFrames =
            augment(gatherFrames(video.frames, clipViews[b].shortIdx), cfg_.sigmaAug, rng_());
    }

    EncoderParams grads = zerosLike(params_);
    const LossBreakdown breakdown = batchLossAndGrads(params_, clipViews, cfg_.loss, &grads);

    bool finite = true;
    grads.forEachTensor([&](const auto& t) { finite = finite && t.allFinite(); });
    if (!finite)
        throw std::runtime_error("training aborted: non-finite gradient at step " +
                                 std::to_string(step_));

    StepMetrics m;
    m.step = step_;
    m.epoch = static_cast<int>(step_ / stepsPerEpoch_);
    m.lr = lrAt(step_, static_cast<double>(totalSteps_),
                cfg_.warmupEpochs * static_cast<double>(stepsPerEpoch_), cfg_.baseLr);
    m.fine = breakdown.fine;
    m.persistent = breakdown.persistent;
    m.total = breakdown.total;

    sgdStep(params_, grads, velocity_, m.lr, cfg_.momentum);
    ++step_;
    return m;
}

Json Pretrainer::saveState() const {
    return Json{{"format", "teg-trainstate-v1"},
                {"encoder", encoderToJson(params_)},
                {"velocity", encoderToJson(velocity_)},
                {"step", step_},
                {"rng", serializeRng(rng_)},
                {"epoch_order", epochOrder_},
                {"epoch_pos", epochPos_}};
}

Pretrainer Pretrainer::restore(const Dataset& dataset, const TrainConfig& cfg, const Json& state) {
    if (state.value("format", "") != "teg-trainstate-v1")
        throw ConfigError("unrecognized train state format tag");
    Pretrainer t(dataset, cfg);
    t.params_ = encoderFromJson(state.at("encoder"));
    t.velocity_ = encoderFromJson(state.at("velocity"));
    t.step_ = state.at("step").get<long>();
    t.rng_ = deserializeRng(state.at("rng").get<std::string>());
    t.epochOrder_ = state.at("epoch_order").get<std::vector<int>>();
    t.epochPos_ = state.at("epoch_pos").get<std::size_t>();
    return t;
}

TrainResult pretrain(const Dataset& dataset, const TrainConfig& cfg) {
    Pretrainer trainer(dataset, cfg);
    TrainResult result;
    result.metrics.reserve(static_cast<std::size_t>(trainer.totalSteps()));
    while (!trainer.done()) result.metrics.push_back(trainer.step());
    result.params = trainer.params();
    return result;
}

}  // namespace teg
