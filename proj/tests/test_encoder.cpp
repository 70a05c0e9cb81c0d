#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>

#include "teg/encoder.hpp"

using namespace teg;

namespace {

EncoderConfig tinyConfig() {
    EncoderConfig cfg;
    cfg.inputDim = 4;
    cfg.hiddenDim = 5;
    cfg.featureDim = 5;
    cfg.embedDim = 3;
    cfg.kernel = 3;
    return cfg;
}

Matrix randomFrames(Index t, Index d, std::uint64_t seed) {
    Rng rng = makeRng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix m(t, d);
    for (Index r = 0; r < t; ++r)
        for (Index c = 0; c < d; ++c) m(r, c) = gauss(rng);
    return m;
}

void makeIdentityConv(EncoderParams& params) {
    for (auto& w : params.convW) w.setZero();
    params.convW[params.config.kernel / 2] =
        Matrix::Identity(params.config.hiddenDim, params.config.featureDim);
    params.convB.setZero();
}

}  // namespace

TEST_CASE("output shape is T x featureDim") {
    const EncoderParams params = initEncoder(tinyConfig(), 0);
    for (int t : {1, 2, 7, 31}) {
        const Matrix out = forwardBackbone(params, randomFrames(t, 4, 1));
        CHECK(out.rows() == t);
        CHECK(out.cols() == 5);
    }
}

TEST_CASE("identity conv reduces the backbone to the frame perceptron") {
    EncoderParams params = initEncoder(tinyConfig(), 0);
    makeIdentityConv(params);
    const Matrix frames = randomFrames(9, 4, 2);
    const Matrix out = forwardBackbone(params, frames);
    const Matrix perceptron =
        ((frames * params.frameW).rowwise() + params.frameB.transpose()).array().tanh();
    CHECK((out - perceptron).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("T=1 with k=1 identity conv equals one perceptron application") {
    EncoderConfig cfg = tinyConfig();
    cfg.kernel = 1;
    EncoderParams params = initEncoder(cfg, 0);
    makeIdentityConv(params);
    const Matrix frames = randomFrames(1, 4, 3);
    const Matrix out = forwardBackbone(params, frames);
    const Matrix expected =
        ((frames * params.frameW).rowwise() + params.frameB.transpose()).array().tanh();
    CHECK((out - expected).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("forward is deterministic") {
    const EncoderParams params = initEncoder(tinyConfig(), 5);
    const Matrix frames = randomFrames(8, 4, 6);
    CHECK(forwardBackbone(params, frames) == forwardBackbone(params, frames));
}

TEST_CASE("temporal receptive field is limited to the conv radius") {
    const EncoderParams params = initEncoder(tinyConfig(), 7);  // k=3 -> radius 1
    const Matrix frames = randomFrames(12, 4, 8);
    const Matrix base = forwardBackbone(params, frames);
    Matrix perturbed = frames;
    perturbed.row(6).array() += 1.0;
    const Matrix out = forwardBackbone(params, perturbed);
    for (Index t = 0; t < out.rows(); ++t) {
        const double delta = (out.row(t) - base.row(t)).norm();
        if (t >= 5 && t <= 7)
            continue;  // inside the receptive field, may change
        CHECK(delta == 0.0);
    }
    CHECK((out.row(6) - base.row(6)).norm() > 0.0);
}

TEST_CASE("projection rows are unit norm and scale invariant") {
    const EncoderParams params = initEncoder(tinyConfig(), 9);
    const Matrix feats = randomFrames(6, 5, 10);
    const Matrix z = project(params, Head::Fine, feats);
    for (Index r = 0; r < z.rows(); ++r) CHECK(std::abs(z.row(r).norm() - 1.0) < 1e-9);
    // scaling the pre-normalization output leaves rows unchanged: feed a row whose
    // head output is scaled by scaling w2/b2 of a copy
    EncoderParams scaled = params;
    scaled.headFine.w2 *= 5.0;
    scaled.headFine.b2 *= 5.0;
    const Matrix z2 = project(scaled, Head::Fine, feats);
    CHECK((z - z2).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("the two heads differ under random init") {
    const EncoderParams params = initEncoder(tinyConfig(), 11);
    const Matrix feats = randomFrames(4, 5, 12);
    const Matrix zp = project(params, Head::Persistent, feats);
    const Matrix zf = project(params, Head::Fine, feats);
    CHECK((zp - zf).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("backward before forward is a state error") {
    EncoderParams params = initEncoder(tinyConfig(), 13);
    EncoderParams grads = zerosLike(params);
    BackboneCache cache;
    CHECK_THROWS_AS(backwardBackbone(params, cache, Matrix::Zero(3, 5), grads), StateError);
    HeadCache hcache;
    CHECK_THROWS_AS(backwardProject(params, Head::Fine, hcache, Matrix::Zero(3, 3), grads),
                    StateError);
}

TEST_CASE("zero upstream gradient gives zero parameter gradients") {
    EncoderParams params = initEncoder(tinyConfig(), 14);
    EncoderParams grads = zerosLike(params);
    BackboneCache cache;
    forwardBackbone(params, randomFrames(5, 4, 15), cache);
    backwardBackbone(params, cache, Matrix::Zero(5, 5), grads);
    grads.forEachTensor([](const auto& t) { CHECK(t.cwiseAbs().maxCoeff() == 0.0); });
}

TEST_CASE("normalization gradient is orthogonal to the output row") {
    const EncoderParams params = initEncoder(tinyConfig(), 16);
    const Matrix feats = randomFrames(5, 5, 17);
    HeadCache cache;
    const Matrix z = project(params, Head::Fine, feats, cache);
    // gradient through normalization alone: d preNorm = (g - (g.z)z)/|v|
    const Matrix g = randomFrames(5, 3, 18);
    for (Index r = 0; r < z.rows(); ++r) {
        Eigen::RowVectorXd d =
            (g.row(r) - g.row(r).dot(z.row(r)) * z.row(r)) / cache.norms(r);
        // the pre-normalization gradient has no component along z
        CHECK(std::abs(d.dot(z.row(r))) < 1e-9);
    }
}

TEST_CASE("backbone+head gradients match central finite differences") {
    EncoderParams params = initEncoder(tinyConfig(), 19);
    const Matrix frames = randomFrames(6, 4, 20);
    // scalar objective: sum of embeddings weighted by a fixed random matrix
    const Matrix weight = randomFrames(6, 3, 21);

    auto evalLoss = [&](const EncoderParams& p) {
        const Matrix feats = forwardBackbone(p, frames);
        const Matrix z = project(p, Head::Fine, feats);
        return (z.array() * weight.array()).sum();
    };

    EncoderParams grads = zerosLike(params);
    BackboneCache bcache;
    HeadCache hcache;
    const Matrix feats = forwardBackbone(params, frames, bcache);
    project(params, Head::Fine, feats, hcache);
    const Matrix dFeats = backwardProject(params, Head::Fine, hcache, weight, grads);
    backwardBackbone(params, bcache, dFeats, grads);
    const Vector analytic = grads.flatten();

    Vector flat = params.flatten();
    Rng rng = makeRng(22);
    std::uniform_int_distribution<Index> dist(0, flat.size() - 1);
    const double h = 1e-5;
    for (int i = 0; i < 10; ++i) {
        const Index c = dist(rng);
        Vector plus = flat, minus = flat;
        plus(c) += h;
        minus(c) -= h;
        EncoderParams pp = params, pm = params;
        pp.unflatten(plus);
        pm.unflatten(minus);
        const double fd = (evalLoss(pp) - evalLoss(pm)) / (2 * h);
        const double denom = std::max({std::abs(fd), std::abs(analytic(c)), 1e-4});
        CHECK(std::abs(fd - analytic(c)) / denom < 1e-4);
    }
}

TEST_CASE("checkpoint round-trip is exact and shape-checked") {
    const EncoderParams params = initEncoder(tinyConfig(), 23);
    const Json j = encoderToJson(params);
    const EncoderParams back = encoderFromJson(j);
    CHECK(back.flatten() == params.flatten());

    Json bad = j;
    bad["config"]["hidden_dim"] = 7;
    CHECK_THROWS_AS(encoderFromJson(bad), ConfigError);
}

TEST_CASE("even kernels are rejected") {
    EncoderConfig cfg = tinyConfig();
    cfg.kernel = 4;
    CHECK_THROWS_AS(initEncoder(cfg, 0), ConfigError);
}
