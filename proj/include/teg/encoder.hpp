#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "teg/common.hpp"
#include "teg/rng.hpp"
#include "teg/serialize.hpp"

namespace teg {

struct EncoderConfig {
    int inputDim = 16;     // per-frame feature dimension of the data
    int hiddenDim = 32;    // frame perceptron width
    int featureDim = 16;   // backbone output channels
    int embedDim = 16;     // projection head output channels
    int kernel = 5;        // temporal conv width, odd
    bool normalizeEmbeddings = true;

    void validate() const;
    Json toJson() const;
    static EncoderConfig fromJson(const Json& j);
};

enum class Head { Persistent, Fine };

// Two-layer perceptron applied per frame: tanh(x W1 + b1) W2 + b2.
struct MlpHead {
    Matrix w1;
    Vector b1;
    Matrix w2;
    Vector b2;
};

struct EncoderParams {
    EncoderConfig config;
    Matrix frameW;               // inputDim x hiddenDim
    Vector frameB;               // hiddenDim
    std::vector<Matrix> convW;   // kernel taps, each hiddenDim x featureDim
    Vector convB;                // featureDim
    MlpHead headPersistent;
    MlpHead headFine;

    long parameterCount() const;
    Vector flatten() const;
    void unflatten(const Vector& flat);

    // Fixed tensor enumeration order; shared by flatten, SGD and checkpoints.
    template <class Fn>
    void forEachTensor(Fn&& fn) {
        fn(frameW); fn(frameB);
        for (auto& w : convW) fn(w);
        fn(convB);
        fn(headPersistent.w1); fn(headPersistent.b1);
        fn(headPersistent.w2); fn(headPersistent.b2);
        fn(headFine.w1); fn(headFine.b1);
        fn(headFine.w2); fn(headFine.b2);
    }
    template <class Fn>
    void forEachTensor(Fn&& fn) const {
        const_cast<EncoderParams*>(this)->forEachTensor(
            [&](auto& t) { fn(static_cast<const std::decay_t<decltype(t)>&>(t)); });
    }
};

EncoderParams initEncoder(const EncoderConfig& cfg, std::uint64_t seed);
EncoderParams zerosLike(const EncoderParams& params);

// Cached intermediates of one backbone pass, consumed by backwardBackbone.
struct BackboneCache {
    Matrix input;        // T x d
    Matrix hidden;       // T x h1, post-tanh
    bool valid = false;
};

// T x featureDim per-frame features: frame perceptron then same-length
// temporal conv with edge-replication padding.
Matrix forwardBackbone(const EncoderParams& params, const Matrix& frames, BackboneCache& cache);
Matrix forwardBackbone(const EncoderParams& params, const Matrix& frames);

// Accumulates parameter gradients into grads; returns gradient w.r.t. input frames.
Matrix backwardBackbone(const EncoderParams& params, const BackboneCache& cache,
                        const Matrix& gradOutput, EncoderParams& grads);

struct HeadCache {
    Matrix input;        // T x h
    Matrix hidden;       // T x h, post-tanh
    Matrix preNorm;      // T x c
    Vector norms;        // T
    Matrix output;       // T x c, unit rows when normalization is on
    bool valid = false;
};

// Per-frame projection into the selected embedding space; rows L2-normalized.
Matrix project(const EncoderParams& params, Head head, const Matrix& features, HeadCache& cache);
Matrix project(const EncoderParams& params, Head head, const Matrix& features);

Matrix backwardProject(const EncoderParams& params, Head head, const HeadCache& cache,
                       const Matrix& gradOutput, EncoderParams& grads);

// Checkpoint I/O. The optional state block (optimizer velocity, RNG stream,
// step counters) makes mid-run resume bit-exact; probes ignore it.
Json encoderToJson(const EncoderParams& params);
EncoderParams encoderFromJson(const Json& j);
void saveCheckpoint(const Json& checkpoint, const std::string& path);
Json loadCheckpoint(const std::string& path);

}  // namespace teg
