// Acceptance suite: one test case per criterion, each printing a single
// summary line with the measured values. Criteria 5-7 and 9 run the standard
// synthetic benchmark (200 videos of 300 frames, 5 events from 5 classes,
// 4 themes, seeds 0/1/2) end to end.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "teg/experiment.hpp"

using namespace teg;
namespace fs = std::filesystem;

namespace {

double seconds(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void report(int criterion, const char* what, bool ok, const std::string& detail) {
    std::printf("[criterion %2d] %-28s %s  (%s)\n", criterion, what, ok ? "PASS" : "FAIL",
                detail.c_str());
    std::fflush(stdout);
}

Matrix randomUnitRows(Index rows, Index cols, Rng& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix m(rows, cols);
    for (Index r = 0; r < rows; ++r) {
        for (Index c = 0; c < cols; ++c) m(r, c) = gauss(rng);
        m.row(r) /= m.row(r).norm();
    }
    return m;
}

EmbeddingBlock makeBlock(const Matrix& embeddings, const Vector& temporalIndex) {
    EmbeddingBlock b;
    b.embeddings = embeddings;
    b.temporalIndex = temporalIndex;
    return b;
}

// ---- shared benchmark runs (criteria 5, 6, 7, 9) --------------------------

struct SeedRun {
    BenchmarkScores ps, fg;
    double f1Ps = 0, f1Fg = 0;
    double simPs = 0, simFg = 0;
};

struct BenchmarkResults {
    std::array<SeedRun, 3> seeds;
    double modeEvent[4] = {0, 0, 0, 0};  // LSC, LSR, SSR, SSC means
    double probeSeconds = 0;             // criterion 5 budget
};

double meanSim(const EncoderParams& params, const Dataset& ds) {
    const int videos = std::min<int>(50, static_cast<int>(ds.videos.size()));
    double sum = 0;
    for (int v = 0; v < videos; ++v)
        sum += meanOffDiagonal(similarityMatrix(params, ds.videos[v], 5)) / videos;
    return sum;
}

const BenchmarkResults& benchmark() {
    static const BenchmarkResults results = [] {
        BenchmarkResults out;
        const std::array<std::uint64_t, 3> seeds{0, 1, 2};
        const auto t0 = std::chrono::steady_clock::now();
        std::array<std::array<EncoderParams, 2>, 3> checkpoints;
        for (std::size_t si = 0; si < seeds.size(); ++si) {
            const Dataset ds = generateDataset(benchmarkGenerator(seeds[si]));
            for (int ai = 0; ai < 2; ++ai) {
                const double alpha = ai == 0 ? 0.0 : 0.9;
                const TrainResult tr = pretrain(ds, benchmarkTrain(alpha, seeds[si]));
                checkpoints[si][ai] = tr.params;
                ProbeConfig pc;
                pc.seed = seeds[si];
                (ai == 0 ? out.seeds[si].ps : out.seeds[si].fg) =
                    probeScores(tr.params, ds, pc);
            }
        }
        out.probeSeconds = seconds(t0);

        for (std::size_t si = 0; si < seeds.size(); ++si) {
            const Dataset ds = generateDataset(benchmarkGenerator(seeds[si]));
            WindowConfig window;
            out.seeds[si].f1Ps = benchmarkBoundaryF1(checkpoints[si][0], ds, window, 0.05, 30,
                                                     0.05, seeds[si]);
            out.seeds[si].f1Fg = benchmarkBoundaryF1(checkpoints[si][1], ds, window, 0.05, 30,
                                                     0.05, seeds[si]);
            out.seeds[si].simPs = meanSim(checkpoints[si][0], ds);
            out.seeds[si].simFg = meanSim(checkpoints[si][1], ds);
        }

        const std::array<SamplingMode, 4> modes{
            SamplingMode::LongShortContained, SamplingMode::LongShortRandom,
            SamplingMode::ShortShortRandom, SamplingMode::ShortShortContained};
        for (std::size_t mi = 0; mi < modes.size(); ++mi) {
            for (std::uint64_t seed : seeds) {
                if (modes[mi] == SamplingMode::LongShortContained) {
                    // identical config to the alpha=0.9 run above
                    out.modeEvent[mi] += out.seeds[seed].fg.eventAccuracy / 3;
                    continue;
                }
                const Dataset ds = generateDataset(benchmarkGenerator(seed));
                TrainConfig tc = benchmarkTrain(0.9, seed);
                tc.mode = modes[mi];
                const TrainResult tr = pretrain(ds, tc);
                ProbeConfig pc;
                pc.seed = seed;
                pc.task = ProbeTask::Event;
                out.modeEvent[mi] += runProbe(tr.params, ds, pc).valAccuracy / 3;
            }
        }
        return out;
    }();
    return results;
}

}  // namespace

TEST_CASE("criterion 1: gradient correctness") {
    const auto t0 = std::chrono::steady_clock::now();
    const GradCheckReport r = runGradCheck(1, 64);
    const double elapsed = seconds(t0);
    const bool ok = r.maxRelError < 1e-4 && r.coordsChecked >= 50 && elapsed < 60;
    char buf[160];
    std::snprintf(buf, sizeof buf, "max rel error %.3g over %d coords in %.1f s", r.maxRelError,
                  r.coordsChecked, elapsed);
    report(1, "gradient check", ok, buf);
    CHECK(ok);
}

TEST_CASE("criterion 2: fine loss with n=m=1 reduces to persistent loss") {
    Rng rng = makeRng(2);
    std::uniform_int_distribution<int> dimDist(2, 12), negDist(1, 8);
    double worst = 0;
    for (int i = 0; i < 1000; ++i) {
        const Index c = dimDist(rng);
        const int numNeg = negDist(rng);
        const EmbeddingBlock anchor = makeBlock(randomUnitRows(1, c, rng), Vector::Zero(1));
        const EmbeddingBlock positive = makeBlock(randomUnitRows(1, c, rng), Vector::Zero(1));
        std::vector<EmbeddingBlock> negStore;
        std::vector<const EmbeddingBlock*> negatives;
        for (int k = 0; k < numNeg; ++k)
            negStore.push_back(makeBlock(randomUnitRows(1, c, rng), Vector::Zero(1)));
        for (const auto& b : negStore) negatives.push_back(&b);
        const double fine = fineLoss(anchor, positive, negatives, 0.1).loss;
        const double persistent = persistentLoss(anchor, positive, negatives, 0.1).loss;
        worst = std::max(worst, std::abs(fine - persistent));
    }
    const bool ok = worst < 1e-12;
    char buf[96];
    std::snprintf(buf, sizeof buf, "max |L_f - L_p| = %.3g over 1000 instances", worst);
    report(2, "n=m=1 reduction identity", ok, buf);
    CHECK(ok);
}

TEST_CASE("criterion 3: correspondence matches the exhaustive argmin") {
    // worked example: long temporal indices [14,46,78,110], short index 55
    const EmbeddingBlock longBlock =
        makeBlock(Matrix::Identity(4, 4), (Vector(4) << 14, 46, 78, 110).finished());
    const EmbeddingBlock shortBlock =
        makeBlock(Matrix::Identity(1, 4), (Vector(1) << 55).finished());
    const auto worked = matchCorrespondence(shortBlock, longBlock);
    const bool workedOk = worked.size() == 1 && worked[0] == std::pair<int, int>{0, 1};

    Rng rng = makeRng(3);
    const std::array<int, 3> ns{1, 2, 4};
    const std::array<int, 4> ms{1, 2, 4, 8};
    int mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int longT = 8 * (1 + static_cast<int>(rng() % 3));
        const int shortT = 4 * (1 + static_cast<int>(rng() % 2));
        // short span stays below the long span so contained sampling is valid
        const int longStride = 3 + static_cast<int>(rng() % 2);
        const int shortStride = 1 + static_cast<int>(rng() % 2);
        const int videoFrames = longT * longStride + shortT * shortStride + 64;
        const ClipPair pair = sampleClipPair(videoFrames, SamplingMode::LongShortContained, longT,
                                             longStride, shortT, shortStride, rng);
        const int n = ns[rng() % ns.size()], m = ms[rng() % ms.size()];
        const EmbeddingBlock sb = aggregate(randomUnitRows(shortT, 6, rng),
                                            frameIndices(pair.shortClip), n);
        const EmbeddingBlock lb = aggregate(randomUnitRows(longT, 6, rng),
                                            frameIndices(pair.longClip), m);
        const auto got = matchCorrespondence(sb, lb);
        for (const auto& [i, j] : got) {
            int best = 0;
            for (int k = 1; k < m; ++k)
                if (std::abs(lb.temporalIndex(k) - sb.temporalIndex(i)) <
                    std::abs(lb.temporalIndex(best) - sb.temporalIndex(i)))
                    best = k;
            if (j != best) ++mismatches;
        }
    }
    const bool ok = workedOk && mismatches == 0;
    char buf[96];
    std::snprintf(buf, sizeof buf, "worked example (0,1): %s; %d mismatches in 1000 pairs",
                  workedOk ? "yes" : "no", mismatches);
    report(3, "correspondence oracle", ok, buf);
    CHECK(ok);
}

TEST_CASE("criterion 4: loss sanity on degenerate inputs") {
    Rng rng = makeRng(4);
    double worstEqual = 0, worstZero = 0, worstMass = 0;
    for (int numNeg : {1, 5, 31}) {
        const Matrix u = randomUnitRows(1, 6, rng);
        const EmbeddingBlock block = makeBlock(u, Vector::Zero(1));
        std::vector<EmbeddingBlock> negStore(static_cast<std::size_t>(numNeg), block);
        std::vector<const EmbeddingBlock*> negatives;
        for (const auto& b : negStore) negatives.push_back(&b);
        const double loss = persistentLoss(block, block, negatives, 0.1).loss;
        worstEqual = std::max(worstEqual, std::abs(loss - std::log1p(numNeg)));
    }
    {
        const EmbeddingBlock a = makeBlock(randomUnitRows(1, 6, rng), Vector::Zero(1));
        const EmbeddingBlock p = makeBlock(randomUnitRows(1, 6, rng), Vector::Zero(1));
        worstZero = std::abs(persistentLoss(a, p, {}, 0.1).loss);
    }
    // recover softmax probabilities from the exact gradients:
    // dL/dpositive = (p_pos - 1)/tau * anchor, dL/dneg_k = p_k/tau * anchor
    for (int trial = 0; trial < 100; ++trial) {
        const double tau = 0.1;
        const EmbeddingBlock a = makeBlock(randomUnitRows(1, 6, rng), Vector::Zero(1));
        const EmbeddingBlock p = makeBlock(randomUnitRows(1, 6, rng), Vector::Zero(1));
        std::vector<EmbeddingBlock> negStore;
        std::vector<const EmbeddingBlock*> negatives;
        for (int k = 0; k < 7; ++k)
            negStore.push_back(makeBlock(randomUnitRows(1, 6, rng), Vector::Zero(1)));
        for (const auto& b : negStore) negatives.push_back(&b);
        const ContrastiveResult r = persistentLoss(a, p, negatives, tau);
        double mass = 1.0 + tau * r.gradPositive.row(0).dot(a.embeddings.row(0));
        for (const Matrix& g : r.gradNegatives)
            mass += tau * g.row(0).dot(a.embeddings.row(0));
        worstMass = std::max(worstMass, std::abs(mass - 1.0));
    }
    const bool ok = worstEqual < 1e-9 && worstZero == 0.0 && worstMass < 1e-12;
    char buf[128];
    std::snprintf(buf, sizeof buf,
                  "|L - ln(1+K)| <= %.3g; zero-negative loss %.3g; softmax mass off by %.3g",
                  worstEqual, worstZero, worstMass);
    report(4, "loss sanity", ok, buf);
    CHECK(ok);
}

TEST_CASE("criterion 5: directional alpha trends") {
    const BenchmarkResults& b = benchmark();
    double dEvent = 0, dSequence = 0;
    for (const SeedRun& run : b.seeds) {
        dEvent += (run.fg.eventAccuracy - run.ps.eventAccuracy) / 3;
        dSequence += (run.ps.sequenceAccuracy - run.fg.sequenceAccuracy) / 3;
    }
    const bool ok = dEvent >= 0.03 && dSequence >= 0.03 && b.probeSeconds < 1800;
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "event: fg-ps = %+.1f pts; sequence: ps-fg = %+.1f pts; %.0f s of 1800",
                  100 * dEvent, 100 * dSequence, b.probeSeconds);
    report(5, "alpha probe trends", ok, buf);
    CHECK(ok);
}

TEST_CASE("criterion 6: boundary F1, TeG-FG above TeG-PS") {
    const BenchmarkResults& b = benchmark();
    double ps = 0, fg = 0;
    for (const SeedRun& run : b.seeds) {
        ps += run.f1Ps / 3;
        fg += run.f1Fg / 3;
    }
    const bool ok = fg > ps;
    char buf[96];
    std::snprintf(buf, sizeof buf, "mean F1: fg %.4f vs ps %.4f", fg, ps);
    report(6, "boundary-detection F1", ok, buf);
    CHECK(ok);
}

// Known red: the second clause (short-short-contained scoring lowest) is not
// achievable in this setting. Identical-view positives only diverge through
// the additive-noise augmentation, which offers no invariance shortcut, and
// the encoder's small receptive field keeps the objective local - so SSC acts
// like a denoising task and learns strong event features instead of
// collapsing. Random-start pairings share mostly the theme component and land
// lowest instead. The ordering is asserted as required rather than loosened.
TEST_CASE("criterion 7: sampling-mode ordering") {
    const BenchmarkResults& b = benchmark();
    const double lsc = b.modeEvent[0], lsr = b.modeEvent[1], ssr = b.modeEvent[2],
                 ssc = b.modeEvent[3];
    const bool highest = lsc > lsr && lsc > ssr && lsc > ssc;
    const bool lowest = ssc < lsr && ssc < ssr;
    const bool ok = highest && lowest;
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "event acc lsc %.3f lsr %.3f ssr %.3f ssc %.3f; lsc highest: %s, ssc lowest: %s",
                  lsc, lsr, ssr, ssc, highest ? "yes" : "no", lowest ? "yes" : "no");
    report(7, "sampling-mode ordering", ok, buf);
    CHECK(ok);
}

TEST_CASE("criterion 8: F1 scorer fixtures") {
    BoundaryAnnotation ann;
    ann.sets = {{2.0, 5.0, 8.0}};
    ann.videoLengthSeconds = 10.0;
    const F1Result fixture = f1Score(DetectionSet{{2.3, 5.6, 9.0}}, ann, 0.05);
    const bool fixtureOk = fixture.precision == 1.0 / 3 && fixture.recall == 1.0 / 3 &&
                           fixture.f1 == 1.0 / 3;

    const F1Result perfect = f1Score(DetectionSet{{2.0, 5.0, 8.0}}, ann, 0.05);
    const bool perfectOk = perfect.f1 == 1.0;

    BoundaryAnnotation multi;
    multi.sets = {{1.0, 6.0}, {2.0, 5.0, 8.0}, {9.9}};
    multi.videoLengthSeconds = 10.0;
    const F1Result best = f1Score(DetectionSet{{2.0, 5.0, 8.0}}, multi, 0.05);
    const bool multiOk = best.f1 == 1.0 && best.matchedSetIndex == 1;

    const bool ok = fixtureOk && perfectOk && multiOk;
    char buf[128];
    std::snprintf(buf, sizeof buf, "fixture F1 %.6f (want 1/3); perfect %.1f; multi-set pick %d",
                  fixture.f1, perfect.f1, best.matchedSetIndex);
    report(8, "F1 scorer fixtures", ok, buf);
    CHECK(ok);
}

TEST_CASE("criterion 9: cross-event similarity drops with TeG-FG") {
    const BenchmarkResults& b = benchmark();
    double ps = 0, fg = 0;
    for (const SeedRun& run : b.seeds) {
        ps += run.simPs / 3;
        fg += run.simFg / 3;
    }
    const bool ok = fg < ps;
    char buf[96];
    std::snprintf(buf, sizeof buf, "mean off-diagonal: fg %.4f vs ps %.4f", fg, ps);
    report(9, "similarity-matrix trend", ok, buf);
    CHECK(ok);
}

TEST_CASE("criterion 10: determinism") {
    // CLI byte-reproducibility on a small experiment
    const char* bin = std::getenv("TEG_BIN");
    REQUIRE_MESSAGE(bin != nullptr, "TEG_BIN must point at the teg binary");
    const fs::path root = fs::temp_directory_path() / "teg-acceptance";
    fs::create_directories(root);
    const fs::path cfg = root / "config.json";
    {
        std::ofstream out(cfg);
        out << R"({"generator": {"num_videos": 12, "frames_per_video": 160,
                                 "events_per_video": 3, "min_segment_frames": 20,
                                 "feature_dim": 8, "seed": 3},
                   "train": {"batch_size": 4, "epochs": 2, "warmup_epochs": 1,
                             "encoder": {"input_dim": 8, "hidden_dim": 12, "feature_dim": 6,
                                         "embed_dim": 6, "kernel": 3},
                             "seed": 3},
                   "seed": 3})";
    }
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        return buf.str();
    };
    bool bytesOk = true;
    const fs::path runA = root / "a", runB = root / "b";
    for (const fs::path& dir : {runA, runB}) {
        fs::remove_all(dir);
        for (const char* cmd : {"gen-data", "pretrain", "probe", "simmat"}) {
            const std::string line = std::string(bin) + " " + cmd + " --config " + cfg.string() +
                                     " --out " + dir.string() + " >/dev/null 2>/dev/null";
            bytesOk = bytesOk && WEXITSTATUS(std::system(line.c_str())) == 0;
        }
    }
    for (const char* file :
         {"dataset.json", "metrics.jsonl", "checkpoint.json", "probe-event.json", "simmat.csv"})
        bytesOk = bytesOk && slurp(runA / file) == slurp(runB / file);

    // checkpoint save/load resume is bit-exact for one further step
    GeneratorConfig gen;
    gen.numVideos = 12;
    gen.framesPerVideo = 160;
    gen.eventsPerVideo = 3;
    gen.minSegmentFrames = 20;
    gen.featureDim = 8;
    gen.seed = 5;
    const Dataset ds = generateDataset(gen);
    TrainConfig tc;
    tc.batchSize = 4;
    tc.epochs = 2;
    tc.warmupEpochs = 1;
    tc.encoder.inputDim = 8;
    tc.encoder.hiddenDim = 12;
    tc.encoder.featureDim = 6;
    tc.encoder.embedDim = 6;
    tc.seed = 5;
    Pretrainer full(ds, tc), partial(ds, tc);
    for (int i = 0; i < 3; ++i) {
        full.step();
        partial.step();
    }
    Pretrainer resumed = Pretrainer::restore(ds, tc, Json::parse(partial.saveState().dump()));
    const StepMetrics a = full.step(), b = resumed.step();
    const bool resumeOk =
        a.total == b.total &&
        (full.params().flatten().array() == resumed.params().flatten().array()).all();

    const bool ok = bytesOk && resumeOk;
    char buf[96];
    std::snprintf(buf, sizeof buf, "CLI outputs byte-identical: %s; resume bit-exact: %s",
                  bytesOk ? "yes" : "no", resumeOk ? "yes" : "no");
    report(10, "determinism", ok, buf);
    CHECK(ok);
}
