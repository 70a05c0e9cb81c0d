#include "teg/loss.hpp"

#include <cmath>

namespace teg {

EmbeddingBlock aggregate(const Matrix& embeddings, const std::vector<int>& frameIdx, int groups,
                         AggregateCache& cache, bool renormalize) {
    const Index T = embeddings.rows();
    checkContract(static_cast<Index>(frameIdx.size()) == T, "frame index count mismatch");
    if (groups < 1 || T % groups != 0)
        throw ConfigError("aggregation: group count " + std::to_string(groups) +
                          " does not divide clip length " + std::to_string(T));

    const int per = static_cast<int>(T) / groups;
    EmbeddingBlock block;
    block.embeddings.resize(groups, embeddings.cols());
    block.temporalIndex.resize(groups);
    cache.groupMeans.resize(groups, embeddings.cols());
    cache.norms.resize(groups);
    cache.framesPerGroup = per;

    for (int g = 0; g < groups; ++g) {
        cache.groupMeans.row(g) = embeddings.middleRows(g * per, per).colwise().mean();
        double idxSum = 0;
        for (int i = 0; i < per; ++i) idxSum += frameIdx[static_cast<std::size_t>(g * per + i)];
        block.temporalIndex(g) = idxSum / per;

        if (renormalize) {
            cache.norms(g) = cache.groupMeans.row(g).norm();
            if (cache.norms(g) == 0.0)
                throw ContractError("zero-norm aggregated group " + std::to_string(g));
            block.embeddings.row(g) = cache.groupMeans.row(g) / cache.norms(g);
        } else {
            cache.norms(g) = 1.0;
            block.embeddings.row(g) = cache.groupMeans.row(g);
        }
    }
    cache.valid = true;
    return block;
}

EmbeddingBlock aggregate(const Matrix& embeddings, const std::vector<int>& frameIdx, int groups,
                         bool renormalize) {
    AggregateCache cache;
    return aggregate(embeddings, frameIdx, groups, cache, renormalize);
}

Matrix backwardAggregate(const EmbeddingBlock& block, const AggregateCache& cache,
                         const Matrix& gradBlock, bool renormalize) {
    if (!cache.valid) throw StateError("backwardAggregate called before aggregate");
    const int groups = static_cast<int>(block.groups());
    const int per = cache.framesPerGroup;
    Matrix gradFrames(groups * per, block.embeddings.cols());
    for (int g = 0; g < groups; ++g) {
        Eigen::RowVectorXd dMean;
        if (renormalize) {
            const double along = gradBlock.row(g).dot(block.embeddings.row(g));
            dMean = (gradBlock.row(g) - along * block.embeddings.row(g)) / cache.norms(g);
        } else {
            dMean = gradBlock.row(g);
        }
        for (int i = 0; i < per; ++i) gradFrames.row(g * per + i) = dMean / per;
    }
    return gradFrames;
}

std::vector<std::pair<int, int>> matchCorrespondence(const EmbeddingBlock& shortBlock,
                                                     const EmbeddingBlock& longBlock) {
    checkContract(shortBlock.groups() >= 1 && longBlock.groups() >= 1,
                  "empty embedding block in correspondence");
    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(static_cast<std::size_t>(shortBlock.groups()));
    for (Index i = 0; i < shortBlock.groups(); ++i) {
        int best = 0;
        double bestDist = std::abs(shortBlock.temporalIndex(i) - longBlock.temporalIndex(0));
        for (Index j = 1; j < longBlock.groups(); ++j) {
            const double dist = std::abs(shortBlock.temporalIndex(i) - longBlock.temporalIndex(j));
            if (dist < bestDist) {
                bestDist = dist;
                best = static_cast<int>(j);
            }
        }
        pairs.emplace_back(static_cast<int>(i), best);
    }
    return pairs;
}

namespace {

// One InfoNCE term: anchor row against its positive key and a flat list of
// negative keys, log-sum-exp stabilized. Gradients are accumulated in place.
double infoNceTerm(const Eigen::RowVectorXd& anchor, const Eigen::RowVectorXd& positive,
                   const std::vector<const EmbeddingBlock*>& negatives, double tau, double weight,
                   Matrix& gradAnchor, int anchorRow, Matrix& gradPositive, int positiveRow,
                   std::vector<Matrix>& gradNegatives) {
    const double posLogit = anchor.dot(positive) / tau;
    double maxLogit = posLogit;
    for (const auto* block : negatives)
        for (Index r = 0; r < block->groups(); ++r)
            maxLogit = std::max(maxLogit, anchor.dot(block->embeddings.row(r)) / tau);

    double denom = std::exp(posLogit - maxLogit);
    for (const auto* block : negatives)
        for (Index r = 0; r < block->groups(); ++r)
            denom += std::exp(anchor.dot(block->embeddings.row(r)) / tau - maxLogit);

    const double logProb = (posLogit - maxLogit) - std::log(denom);
    const double pPos = std::exp(posLogit - maxLogit) / denom;

    // dL/danchor = (sum_k p_k key_k - positive) / tau
    Eigen::RowVectorXd expectKey = pPos * positive;
    for (std::size_t b = 0; b < negatives.size(); ++b) {
        const auto* block = negatives[b];
        for (Index r = 0; r < block->groups(); ++r) {
            const double p =
                std::exp(anchor.dot(block->embeddings.row(r)) / tau - maxLogit) / denom;
            expectKey += p * block->embeddings.row(r);
            gradNegatives[b].row(r) += weight * (p / tau) * anchor;
        }
    }
    gradAnchor.row(anchorRow) += weight * (expectKey - positive) / tau;
    gradPositive.row(positiveRow) += weight * ((pPos - 1.0) / tau) * anchor;
    return -logProb;
}

ContrastiveResult contrastive(const EmbeddingBlock& anchor, const EmbeddingBlock& positive,
                              const std::vector<const EmbeddingBlock*>& negatives, double tau,
                              bool matchByIndex) {
    checkConfig(tau > 0, "tau must be > 0");
    checkContract(anchor.groups() >= 1 && positive.groups() >= 1, "empty embedding block");

    ContrastiveResult res;
    res.gradAnchor = Matrix::Zero(anchor.groups(), anchor.embeddings.cols());
    res.gradPositive = Matrix::Zero(positive.groups(), positive.embeddings.cols());
    res.gradNegatives.reserve(negatives.size());
    for (const auto* block : negatives)
        res.gradNegatives.push_back(Matrix::Zero(block->groups(), block->embeddings.cols()));

    const auto pairs = matchByIndex
                           ? matchCorrespondence(anchor, positive)
                           : std::vector<std::pair<int, int>>{{0, 0}};

    const double weight = 1.0 / static_cast<double>(pairs.size());
    double sum = 0;
    for (const auto& [i, j] : pairs) {
        sum += infoNceTerm(anchor.embeddings.row(i), positive.embeddings.row(j), negatives, tau,
                           weight, res.gradAnchor, i, res.gradPositive, j, res.gradNegatives);
    }
    res.loss = sum / static_cast<double>(pairs.size());
    return res;
}

}  // namespace

ContrastiveResult fineLoss(const EmbeddingBlock& anchor, const EmbeddingBlock& positive,
                           const std::vector<const EmbeddingBlock*>& negatives, double tau) {
    return contrastive(anchor, positive, negatives, tau, /*matchByIndex=*/true);
}

ContrastiveResult persistentLoss(const EmbeddingBlock& anchor, const EmbeddingBlock& positive,
                                 const std::vector<const EmbeddingBlock*>& negatives, double tau) {
    checkContract(anchor.groups() == 1 && positive.groups() == 1,
                  "persistent loss expects single-group blocks");
    return contrastive(anchor, positive, negatives, tau, /*matchByIndex=*/false);
}

LossBreakdown totalLoss(double fine, double persistent, double alpha) {
    checkConfig(alpha >= 0 && alpha <= 1, "alpha must lie in [0,1]");
    LossBreakdown out;
    out.fine = fine;
    out.persistent = persistent;
    out.total = alpha * fine + (1.0 - alpha) * persistent;
    return out;
}

}  // namespace teg
