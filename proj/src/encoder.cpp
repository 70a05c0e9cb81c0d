#include "teg/encoder.hpp"

#include <cmath>
#include <fstream>

namespace teg {

void EncoderConfig::validate() const {
    checkConfig(inputDim >= 1 && hiddenDim >= 1 && featureDim >= 1 && embedDim >= 1,
                "encoder dimensions must be >= 1");
    checkConfig(kernel >= 1 && kernel % 2 == 1, "conv kernel width must be odd and >= 1");
}

Json EncoderConfig::toJson() const {
    return Json{{"input_dim", inputDim},       {"hidden_dim", hiddenDim},
                {"feature_dim", featureDim},   {"embed_dim", embedDim},
                {"kernel", kernel},            {"normalize_embeddings", normalizeEmbeddings}};
}

EncoderConfig EncoderConfig::fromJson(const Json& j) {
    requireKnownKeys(
        j, {"input_dim", "hidden_dim", "feature_dim", "embed_dim", "kernel", "normalize_embeddings"},
        "encoder config");
    EncoderConfig cfg;
    cfg.inputDim = j.value("input_dim", cfg.inputDim);
    cfg.hiddenDim = j.value("hidden_dim", cfg.hiddenDim);
    cfg.featureDim = j.value("feature_dim", cfg.featureDim);
    cfg.embedDim = j.value("embed_dim", cfg.embedDim);
    cfg.kernel = j.value("kernel", cfg.kernel);
    cfg.normalizeEmbeddings = j.value("normalize_embeddings", cfg.normalizeEmbeddings);
    cfg.validate();
    return cfg;
}

long EncoderParams::parameterCount() const {
    long count = 0;
    forEachTensor([&](const auto& t) { count += static_cast<long>(t.size()); });
    return count;
}

Vector EncoderParams::flatten() const {
    Vector flat(parameterCount());
    Index pos = 0;
    forEachTensor([&](const auto& t) {
        for (Index i = 0; i < t.size(); ++i) flat(pos++) = t.data()[i];
    });
    return flat;
}

void EncoderParams::unflatten(const Vector& flat) {
    checkContract(flat.size() == parameterCount(), "flat vector size mismatch");
    Index pos = 0;
    forEachTensor([&](auto& t) {
        for (Index i = 0; i < t.size(); ++i) t.data()[i] = flat(pos++);
    });
}

namespace {

Matrix fanInUniform(Index rows, Index cols, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix m(rows, cols);
    for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
    return m;
}

MlpHead initHead(int in, int out, Rng& rng) {
    MlpHead head;
    head.w1 = fanInUniform(in, in, rng);
    head.b1 = Vector::Zero(in);
    head.w2 = fanInUniform(in, out, rng);
    head.b2 = Vector::Zero(out);
    return head;
}

Matrix tanhOf(const Matrix& m) { return m.array().tanh().matrix(); }

}  // namespace

EncoderParams initEncoder(const EncoderConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng = makeRng(seed);
    EncoderParams p;
    p.config = cfg;
    p.frameW = fanInUniform(cfg.inputDim, cfg.hiddenDim, rng);
    p.frameB = Vector::Zero(cfg.hiddenDim);
    p.convW.resize(cfg.kernel);
    // Fan-in of the conv is kernel * hiddenDim.
    const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.kernel) * cfg.hiddenDim);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& w : p.convW) {
        w.resize(cfg.hiddenDim, cfg.featureDim);
        for (Index r = 0; r < w.rows(); ++r)
            for (Index c = 0; c < w.cols(); ++c) w(r, c) = dist(rng);
    }
    p.convB = Vector::Zero(cfg.featureDim);
    p.headPersistent = initHead(cfg.featureDim, cfg.embedDim, rng);
    p.headFine = initHead(cfg.featureDim, cfg.embedDim, rng);
    return p;
}

EncoderParams zerosLike(const EncoderParams& params) {
    EncoderParams z = params;
    z.forEachTensor([](auto& t) { t.setZero(); });
    return z;
}

Matrix forwardBackbone(const EncoderParams& params, const Matrix& frames, BackboneCache& cache) {
    const auto& cfg = params.config;
    checkContract(frames.cols() == cfg.inputDim, "frame dimension does not match encoder inputDim");
    checkContract(frames.rows() >= 1, "empty frame sequence");
    checkContract(frames.allFinite(), "non-finite frame values");

    const Index T = frames.rows();
    cache.input = frames;
    cache.hidden = tanhOf((frames * params.frameW).rowwise() + params.frameB.transpose());

    const int radius = cfg.kernel / 2;
    Matrix out = Matrix::Zero(T, cfg.featureDim);
    out.rowwise() += params.convB.transpose();
    for (int tap = 0; tap < cfg.kernel; ++tap) {
        const int offset = tap - radius;
        for (Index t = 0; t < T; ++t) {
            const Index src = std::clamp<Index>(t + offset, 0, T - 1);
            out.row(t) += cache.hidden.row(src) * params.convW[tap];
        }
    }
    cache.valid = true;
    return out;
}

Matrix forwardBackbone(const EncoderParams& params, const Matrix& frames) {
    BackboneCache cache;
    return forwardBackbone(params, frames, cache);
}

Matrix backwardBackbone(const EncoderParams& params, const BackboneCache& cache,
                        const Matrix& gradOutput, EncoderParams& grads) {
    if (!cache.valid) throw StateError("backwardBackbone called before forwardBackbone");
    const auto& cfg = params.config;
    const Index T = cache.input.rows();
    checkContract(gradOutput.rows() == T && gradOutput.cols() == cfg.featureDim,
                  "gradOutput shape mismatch");

    const int radius = cfg.kernel / 2;
    Matrix dHidden = Matrix::Zero(T, cfg.hiddenDim);
    grads.convB += gradOutput.colwise().sum();
    for (int tap = 0; tap < cfg.kernel; ++tap) {
        const int offset = tap - radius;
        for (Index t = 0; t < T; ++t) {
            const Index src = std::clamp<Index>(t + offset, 0, T - 1);
            grads.convW[tap] += cache.hidden.row(src).transpose() * gradOutput.row(t);
            dHidden.row(src) += gradOutput.row(t) * params.convW[tap].transpose();
        }
    }

    // tanh' = 1 - tanh^2
    Matrix dPre = dHidden.array() * (1.0 - cache.hidden.array().square());
    grads.frameW += cache.input.transpose() * dPre;
    grads.frameB += dPre.colwise().sum();
    return dPre * params.frameW.transpose();
}

Matrix project(const EncoderParams& params, Head head, const Matrix& features, HeadCache& cache) {
    const auto& mlp = head == Head::Persistent ? params.headPersistent : params.headFine;
    checkContract(features.cols() == params.config.featureDim,
                  "feature dimension does not match encoder featureDim");
    checkContract(features.allFinite(), "non-finite features");

    cache.input = features;
    cache.hidden = tanhOf((features * mlp.w1).rowwise() + mlp.b1.transpose());
    cache.preNorm = (cache.hidden * mlp.w2).rowwise() + mlp.b2.transpose();

    cache.norms = cache.preNorm.rowwise().norm();
    if (params.config.normalizeEmbeddings) {
        cache.output.resizeLike(cache.preNorm);
        for (Index r = 0; r < cache.preNorm.rows(); ++r) {
            if (cache.norms(r) == 0.0)
                throw ContractError("zero-norm embedding row " + std::to_string(r));
            cache.output.row(r) = cache.preNorm.row(r) / cache.norms(r);
        }
    } else {
        cache.output = cache.preNorm;
    }
    cache.valid = true;
    return cache.output;
}

Matrix project(const EncoderParams& params, Head head, const Matrix& features) {
    HeadCache cache;
    return project(params, head, features, cache);
}

Matrix backwardProject(const EncoderParams& params, Head head, const HeadCache& cache,
                       const Matrix& gradOutput, EncoderParams& grads) {
    if (!cache.valid) throw StateError("backwardProject called before project");
    const auto& mlp = head == Head::Persistent ? params.headPersistent : params.headFine;
    auto& mlpGrads = head == Head::Persistent ? grads.headPersistent : grads.headFine;

    Matrix dPreNorm;
    if (params.config.normalizeEmbeddings) {
        // d/dv (v/|v|): project the upstream gradient off the output direction.
        dPreNorm.resizeLike(gradOutput);
        for (Index r = 0; r < gradOutput.rows(); ++r) {
            const double along = gradOutput.row(r).dot(cache.output.row(r));
            dPreNorm.row(r) =
                (gradOutput.row(r) - along * cache.output.row(r)) / cache.norms(r);
        }
    } else {
        dPreNorm = gradOutput;
    }

    mlpGrads.w2 += cache.hidden.transpose() * dPreNorm;
    mlpGrads.b2 += dPreNorm.colwise().sum();
    Matrix dHidden = dPreNorm * mlp.w2.transpose();
    Matrix dPre = dHidden.array() * (1.0 - cache.hidden.array().square());
    mlpGrads.w1 += cache.input.transpose() * dPre;
    mlpGrads.b1 += dPre.colwise().sum();
    return dPre * mlp.w1.transpose();
}

Json encoderToJson(const EncoderParams& params) {
    Json tensors = Json::array();
    params.forEachTensor([&](const auto& t) {
        if constexpr (std::is_same_v<std::decay_t<decltype(t)>, Matrix>)
            tensors.push_back(toJson(t));
        else
            tensors.push_back(toJson(Vector(t)));
    });
    return Json{{"format", "teg-encoder-v1"}, {"config", params.config.toJson()},
                {"tensors", std::move(tensors)}};
}

EncoderParams encoderFromJson(const Json& j) {
    if (j.value("format", "") != "teg-encoder-v1")
        throw ConfigError("unrecognized encoder format tag");
    EncoderConfig cfg = EncoderConfig::fromJson(j.at("config"));
    EncoderParams params = initEncoder(cfg, 0);
    const Json& tensors = j.at("tensors");
    std::size_t idx = 0;
    params.forEachTensor([&](auto& t) {
        if (idx >= tensors.size()) throw ConfigError("checkpoint has too few tensors");
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, Matrix>) {
            Matrix m = matrixFromJson(tensors[idx]);
            if (m.rows() != t.rows() || m.cols() != t.cols())
                throw ConfigError("checkpoint tensor " + std::to_string(idx) + " shape mismatch");
            t = std::move(m);
        } else {
            Vector v = vectorFromJson(tensors[idx]);
            if (v.size() != t.size())
                throw ConfigError("checkpoint tensor " + std::to_string(idx) + " shape mismatch");
            t = std::move(v);
        }
        ++idx;
    });
    if (idx != tensors.size()) throw ConfigError("checkpoint has extra tensors");
    return params;
}

void saveCheckpoint(const Json& checkpoint, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open checkpoint for writing: " + path);
    out << checkpoint.dump();
}

Json loadCheckpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open checkpoint: " + path);
    Json j;
    in >> j;
    return j;
}

}  // namespace teg
