#pragma once

#include <cstdint>
#include <vector>

#include "teg/encoder.hpp"
#include "teg/loss.hpp"
#include "teg/sampling.hpp"
#include "teg/synth_data.hpp"

namespace teg {

struct TrainConfig {
    int batchSize = 32;
    int epochs = 30;
    double baseLr = 0.32 * 32.0 / 1024.0;
    double warmupEpochs = 5.0;
    double momentum = 0.9;
    SamplingMode mode = SamplingMode::LongShortContained;
    int longT = 32;
    int longStride = 4;
    int shortT = 16;
    int shortStride = 2;
    LossConfig loss;
    double sigmaAug = 0.5;
    std::uint64_t seed = 0;
    EncoderConfig encoder;

    void validate() const;
    Json toJson() const;
    static TrainConfig fromJson(const Json& j);
};

// Linear warmup followed by half-period cosine decay. Warmup is counted in
// (possibly fractional) steps so tiny datasets still warm up.
double lrAt(long step, double totalSteps, double warmupSteps, double baseLr);

// v <- mu * v + g; theta <- theta - lr * v (classical momentum).
void sgdStep(EncoderParams& params, const EncoderParams& grads, EncoderParams& velocity, double lr,
             double mu);

// One video's two augmented views plus their original frame indices.
struct ClipViews {
    Matrix shortFrames;
    std::vector<int> shortIdx;
    Matrix longFrames;
    std::vector<int> longIdx;
};

// Mean batch loss with in-batch negatives; accumulates parameter gradients
// when grads is non-null. The training step and the gradient checker share
// this path.
LossBreakdown batchLossAndGrads(const EncoderParams& params, const std::vector<ClipViews>& batch,
                                const LossConfig& loss, EncoderParams* grads);

struct StepMetrics {
    long step = 0;
    int epoch = 0;
    double lr = 0;
    double total = 0;
    double fine = 0;
    double persistent = 0;
};

// Incremental training loop; state serializes for bit-exact resume.
class Pretrainer {
  public:
    Pretrainer(const Dataset& dataset, const TrainConfig& cfg);

    bool done() const { return step_ >= totalSteps_; }
    long stepIndex() const { return step_; }
    long totalSteps() const { return totalSteps_; }

    StepMetrics step();

    const EncoderParams& params() const { return params_; }

    Json saveState() const;
    static Pretrainer restore(const Dataset& dataset, const TrainConfig& cfg, const Json& state);

  private:
    const Dataset* dataset_;
    TrainConfig cfg_;
    EncoderParams params_;
    EncoderParams velocity_;
    Rng rng_;
    long step_ = 0;
    long totalSteps_ = 0;
    long stepsPerEpoch_ = 0;
    std::vector<int> epochOrder_;
    std::size_t epochPos_ = 0;

    void startEpochIfNeeded();
};

struct TrainResult {
    EncoderParams params;
    std::vector<StepMetrics> metrics;
};

TrainResult pretrain(const Dataset& dataset, const TrainConfig& cfg);

}  // namespace teg
