#pragma once

#include <utility>
#include <vector>

#include "teg/common.hpp"
#include "teg/serialize.hpp"

namespace teg {

struct AggregationConfig {
    int shortGroups = 1;  // n
    int longGroups = 4;   // m

    void validate() const {
        checkConfig(shortGroups >= 1 && longGroups >= 1, "group counts must be >= 1");
    }
};

enum class ClipSource { Short, Long };
enum class EmbedSpace { Persistent, Fine };

// Aggregated clip embeddings with their mean original-video frame indices.
struct EmbeddingBlock {
    Matrix embeddings;      // groups x c, unit rows
    Vector temporalIndex;   // groups
    ClipSource source = ClipSource::Short;
    EmbedSpace space = EmbedSpace::Fine;

    Index groups() const { return embeddings.rows(); }
};

struct AggregateCache {
    Matrix groupMeans;   // pre-normalization group means
    Vector norms;
    int framesPerGroup = 0;
    bool valid = false;
};

// Average-pools every consecutive T/g frame embeddings into one group and
// re-normalizes; temporalIndex[r] is the mean frame index of the pooled frames.
EmbeddingBlock aggregate(const Matrix& embeddings, const std::vector<int>& frameIdx, int groups,
                         AggregateCache& cache, bool renormalize = true);
EmbeddingBlock aggregate(const Matrix& embeddings, const std::vector<int>& frameIdx, int groups,
                         bool renormalize = true);

// Gradient w.r.t. the pre-aggregation per-frame embeddings.
Matrix backwardAggregate(const EmbeddingBlock& block, const AggregateCache& cache,
                         const Matrix& gradBlock, bool renormalize = true);

// For each short group i, the long group j with the closest temporal index;
// ties broken toward smaller j.
std::vector<std::pair<int, int>> matchCorrespondence(const EmbeddingBlock& shortBlock,
                                                     const EmbeddingBlock& longBlock);

struct LossConfig {
    double tau = 0.1;
    double alpha = 0.9;
    AggregationConfig agg;

    void validate() const {
        checkConfig(tau > 0, "tau must be > 0");
        checkConfig(alpha >= 0 && alpha <= 1, "alpha must lie in [0,1]");
        agg.validate();
    }
};

// InfoNCE value plus exact gradients w.r.t. every participating embedding row.
struct ContrastiveResult {
    double loss = 0;
    Matrix gradAnchor;
    Matrix gradPositive;
    std::vector<Matrix> gradNegatives;
};

// Dense loss: each short group against its corresponding long group, with all
// aggregated long-clip embeddings of other videos as negatives.
ContrastiveResult fineLoss(const EmbeddingBlock& anchor, const EmbeddingBlock& positive,
                           const std::vector<const EmbeddingBlock*>& negatives, double tau);

// Global loss: single short embedding against the long one, other videos'
// global long embeddings as negatives.
ContrastiveResult persistentLoss(const EmbeddingBlock& anchor, const EmbeddingBlock& positive,
                                 const std::vector<const EmbeddingBlock*>& negatives, double tau);

struct LossBreakdown {
    double fine = 0;
    double persistent = 0;
    double total = 0;
};

// total = alpha * fine + (1 - alpha) * persistent.
LossBreakdown totalLoss(double fine, double persistent, double alpha);

}  // namespace teg
