// teg: command-line driver for the synthetic temporal-granularity experiments.
//
// Every command reads one JSON experiment config (--config), applies --seed /
// --preset overrides, and writes its artifacts under --out. Outputs are
// byte-reproducible for a fixed config + seed and carry the config hash.
#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "teg/experiment.hpp"

namespace fs = std::filesystem;
using namespace teg;

namespace {

std::string hashHex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void writeText(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open output file: " + path.string());
    out << text;
}

std::string readText(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct Run {
    ExperimentConfig cfg;
    fs::path out;
    std::string hash;  // config hash, stamped into every result file

    fs::path datasetPath() const { return out / "dataset.json"; }
    fs::path checkpointPath() const { return out / "checkpoint.json"; }

    Dataset dataset() const {
        if (fs::exists(datasetPath())) {
            Dataset ds = loadDataset(datasetPath().string());
            if (ds.config.toJson() != cfg.generator.toJson())
                throw ConfigError("dataset.json was generated with a different generator config");
            return ds;
        }
        return generateDataset(cfg.generator);
    }

    EncoderParams checkpoint() const {
        if (!fs::exists(checkpointPath()))
            throw StateError("no checkpoint at " + checkpointPath().string() +
                             " (run `teg pretrain` first)");
        return encoderFromJson(loadCheckpoint(checkpointPath().string()));
    }

    std::string checkpointId() const { return hashHex(fnv1a64(readText(checkpointPath()))); }
};

int cmdGenData(const Run& run) {
    const Dataset ds = generateDataset(run.cfg.generator);
    saveDataset(ds, run.datasetPath().string());
    Json report{{"config_hash", run.hash},
                {"num_videos", run.cfg.generator.numVideos},
                {"frames_per_video", run.cfg.generator.framesPerVideo},
                {"path", "dataset.json"}};
    writeText(run.out / "gen-data.json", report.dump(2) + "\n");
    std::printf("wrote %s (%d videos)\n", run.datasetPath().string().c_str(),
                run.cfg.generator.numVideos);
    return 0;
}

int cmdPretrain(const Run& run) {
    const Dataset ds = run.dataset();
    const TrainResult res = pretrain(ds, run.cfg.train);

    std::ostringstream lines;
    lines << Json{{"config_hash", run.hash},
                  {"total_steps", res.metrics.size()}}.dump()
          << "\n";
    for (const StepMetrics& m : res.metrics)
        lines << Json{{"step", m.step}, {"epoch", m.epoch}, {"lr", m.lr},
                      {"L", m.total},  {"L_f", m.fine},    {"L_p", m.persistent}}
                     .dump()
              << "\n";
    writeText(run.out / "metrics.jsonl", lines.str());

    Json checkpoint = encoderToJson(res.params);
    checkpoint["config_hash"] = run.hash;
    saveCheckpoint(checkpoint, run.checkpointPath().string());
    std::printf("pretrained %zu steps, final L=%s\n", res.metrics.size(),
                num(res.metrics.back().total).c_str());
    return 0;
}

int cmdProbe(const Run& run) {
    const Dataset ds = run.dataset();
    const EncoderParams params = run.checkpoint();
    const std::string ckptId = run.checkpointId();
    for (const auto& [task, name] :
         {std::pair{ProbeTask::Event, "event"}, std::pair{ProbeTask::Sequence, "sequence"}}) {
        ProbeConfig pc = run.cfg.probe;
        pc.task = task;
        const ProbeResult res = runProbe(params, ds, pc);
        Json report{{"task", name},
                    {"checkpoint_id", ckptId},
                    {"accuracy", res.valAccuracy},
                    {"num_classes", res.numClasses},
                    {"seed", pc.seed},
                    {"config_hash", run.hash}};
        writeText(run.out / (std::string("probe-") + name + ".json"), report.dump(2) + "\n");
        std::printf("%s probe accuracy %s\n", name, num(res.valAccuracy).c_str());
    }
    return 0;
}

// Head trained on the first 3/4 of the videos; detections and per-video
// scores reported for the held-out rest.
int cmdDetect(const Run& run) {
    const Dataset ds = run.dataset();
    const EncoderParams params = run.checkpoint();
    const std::size_t total = ds.videos.size();
    checkContract(total >= 4, "dataset too small for a detection split");
    const std::size_t trainCount = total * 3 / 4;

    std::vector<const VideoSample*> trainVideos;
    for (std::size_t i = 0; i < trainCount; ++i) trainVideos.push_back(&ds.videos[i]);
    const BoundaryHead head = trainBoundaryHead(params, trainVideos, run.cfg.window,
                                                run.cfg.boundaryHeadEpochs,
                                                run.cfg.boundaryHeadLr, run.cfg.seed);

    std::ostringstream lines;
    lines << Json{{"config_hash", run.hash}, {"rel_dis", run.cfg.relDis}}.dump() << "\n";
    double sum = 0;
    for (std::size_t i = trainCount; i < total; ++i) {
        const auto& v = ds.videos[i];
        const DetectionSet det = detect(head, params, v, run.cfg.window);
        BoundaryAnnotation ann;
        ann.sets = {v.boundaries};
        ann.videoLengthSeconds = v.lengthSeconds();
        const F1Result r = f1Score(det, ann, run.cfg.relDis);
        sum += r.f1;
        lines << Json{{"video_id", i},
                      {"timestamps", det.timestamps},
                      {"num_detections", det.timestamps.size()},
                      {"precision", r.precision},
                      {"recall", r.recall},
                      {"f1", r.f1}}
                     .dump()
              << "\n";
    }
    writeText(run.out / "detections.jsonl", lines.str());
    std::printf("mean F1 %s over %zu videos\n", num(sum / (total - trainCount)).c_str(),
                total - trainCount);
    return 0;
}

int cmdEvalF1(const Run& run) {
    const Dataset ds = run.dataset();
    const fs::path detPath = run.out / "detections.jsonl";
    if (!fs::exists(detPath))
        throw StateError("no detections at " + detPath.string() + " (run `teg detect` first)");

    std::istringstream in(readText(detPath));
    std::string line;
    std::getline(in, line);  // header
    double sum = 0;
    int count = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const Json j = Json::parse(line);
        const std::size_t id = j.at("video_id").get<std::size_t>();
        checkContract(id < ds.videos.size(), "detection references unknown video id");
        DetectionSet det;
        det.timestamps = j.at("timestamps").get<std::vector<double>>();
        BoundaryAnnotation ann;
        ann.sets = {ds.videos[id].boundaries};
        ann.videoLengthSeconds = ds.videos[id].lengthSeconds();
        sum += f1Score(det, ann, run.cfg.relDis).f1;
        ++count;
    }
    checkContract(count > 0, "detections.jsonl holds no detection lines");
    Json report{{"config_hash", run.hash},
                {"rel_dis", run.cfg.relDis},
                {"num_videos", count},
                {"mean_f1", sum / count}};
    writeText(run.out / "f1.json", report.dump(2) + "\n");
    std::printf("mean F1 %s over %d videos\n", num(sum / count).c_str(), count);
    return 0;
}

int cmdSimmat(const Run& run) {
    const Dataset ds = run.dataset();
    const EncoderParams params = run.checkpoint();
    const int videos = std::min<int>(50, static_cast<int>(ds.videos.size()));
    std::ostringstream csv;
    csv << "# config_hash=" << run.hash << "\n";
    csv << "video,row,col,similarity\n";
    double offDiag = 0;
    for (int v = 0; v < videos; ++v) {
        const Matrix sim = similarityMatrix(params, ds.videos[v], 5);
        offDiag += meanOffDiagonal(sim) / videos;
        for (Index r = 0; r < sim.rows(); ++r)
            for (Index c = 0; c < sim.cols(); ++c)
                csv << v << "," << r << "," << c << "," << num(sim(r, c)) << "\n";
    }
    writeText(run.out / "simmat.csv", csv.str());
    std::printf("mean off-diagonal similarity %s over %d videos\n", num(offDiag).c_str(), videos);
    return 0;
}

int cmdGradCheck(const Run& run) {
    const GradCheckReport report = runGradCheck(run.cfg.seed);
    Json j{{"config_hash", run.hash},
           {"max_rel_error", report.maxRelError},
           {"coords_checked", report.coordsChecked}};
    writeText(run.out / "gradcheck.json", j.dump(2) + "\n");
    std::printf("gradcheck max relative error %s over %d coordinates\n",
                num(report.maxRelError).c_str(), report.coordsChecked);
    return report.maxRelError < 1e-4 ? 0 : 1;
}

BenchmarkScores sweepPoint(const Dataset& ds, const TrainConfig& tc, const ProbeConfig& pc) {
    const TrainResult res = pretrain(ds, tc);
    return probeScores(res.params, ds, pc);
}

int cmdAblateAlpha(const Run& run) {
    const Dataset ds = run.dataset();
    std::ostringstream csv;
    csv << "# config_hash=" << run.hash << "\n";
    csv << "alpha,event_accuracy,sequence_accuracy\n";
    for (int i = 0; i <= 10; ++i) {
        TrainConfig tc = run.cfg.train;
        tc.loss.alpha = i / 10.0;
        const BenchmarkScores s = sweepPoint(ds, tc, run.cfg.probe);
        csv << num(tc.loss.alpha) << "," << num(s.eventAccuracy) << ","
            << num(s.sequenceAccuracy) << "\n";
        std::printf("alpha=%.1f event=%s sequence=%s\n", tc.loss.alpha,
                    num(s.eventAccuracy).c_str(), num(s.sequenceAccuracy).c_str());
        std::fflush(stdout);
    }
    writeText(run.out / "ablate-alpha.csv", csv.str());
    return 0;
}

int cmdAblateNm(const Run& run) {
    const Dataset ds = run.dataset();
    std::ostringstream csv;
    csv << "# config_hash=" << run.hash << "\n";
    csv << "n,m,event_accuracy\n";
    for (int n : {1, 2, 4}) {
        for (int m : {1, 2, 4, 8}) {
            TrainConfig tc = run.cfg.train;
            tc.loss.agg.shortGroups = n;
            tc.loss.agg.longGroups = m;
            ProbeConfig pc = run.cfg.probe;
            pc.task = ProbeTask::Event;
            const TrainResult res = pretrain(ds, tc);
            const double acc = runProbe(res.params, ds, pc).valAccuracy;
            csv << n << "," << m << "," << num(acc) << "\n";
            std::printf("n=%d m=%d event=%s\n", n, m, num(acc).c_str());
            std::fflush(stdout);
        }
    }
    writeText(run.out / "ablate-nm.csv", csv.str());
    return 0;
}

int cmdAblateSampling(const Run& run) {
    const Dataset ds = run.dataset();
    std::ostringstream csv;
    csv << "# config_hash=" << run.hash << "\n";
    csv << "mode,event_accuracy\n";
    for (auto mode : {SamplingMode::LongShortContained, SamplingMode::LongShortRandom,
                      SamplingMode::ShortShortRandom, SamplingMode::ShortShortContained}) {
        TrainConfig tc = run.cfg.train;
        tc.mode = mode;
        ProbeConfig pc = run.cfg.probe;
        pc.task = ProbeTask::Event;
        const TrainResult res = pretrain(ds, tc);
        const double acc = runProbe(res.params, ds, pc).valAccuracy;
        csv << samplingModeName(mode) << "," << num(acc) << "\n";
        std::printf("%s event=%s\n", samplingModeName(mode).c_str(), num(acc).c_str());
        std::fflush(stdout);
    }
    writeText(run.out / "ablate-sampling.csv", csv.str());
    return 0;
}

void applyThreadCap() {
    const char* env = std::getenv("TEG_THREADS");
    if (!env || !*env) return;
    char* rest = nullptr;
    const long n = std::strtol(env, &rest, 10);
    if (!rest || *rest != '\0' || n < 1)
        throw ConfigError("TEG_THREADS must be a positive integer");
    Eigen::setNbThreads(static_cast<int>(n));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"temporal-granularity contrastive learning on synthetic event videos"};
    app.fallthrough();
    app.require_subcommand(1);

    std::string configPath, outDir = "teg-out", preset;
    std::uint64_t seed = 0;
    app.add_option("--config", configPath, "experiment config JSON");
    app.add_option("--seed", seed, "override the global seed");
    app.add_option("--out", outDir, "output directory");
    app.add_option("--preset", preset, "loss preset")
        ->check(CLI::IsMember({"teg-ps", "teg-fg"}));

    for (const char* name : {"gen-data", "pretrain", "probe", "detect", "eval-f1", "simmat",
                             "gradcheck", "ablate-alpha", "ablate-nm", "ablate-sampling"})
        app.add_subcommand(name);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "%s\n",
                     Json{{"error", e.what()}, {"type", "usage"}}.dump().c_str());
        return 2;
    }

    try {
        applyThreadCap();

        Run run;
        if (!configPath.empty()) run.cfg = ExperimentConfig::load(configPath);
        if (!preset.empty()) run.cfg.applyPreset(preset);
        if (app.count("--seed") > 0) run.cfg.setSeed(seed);
        run.out = outDir;
        run.hash = hashHex(run.cfg.hash());
        fs::create_directories(run.out);

        const std::string cmd = app.get_subcommands().front()->get_name();
        if (cmd == "gen-data") return cmdGenData(run);
        if (cmd == "pretrain") return cmdPretrain(run);
        if (cmd == "probe") return cmdProbe(run);
        if (cmd == "detect") return cmdDetect(run);
        if (cmd == "eval-f1") return cmdEvalF1(run);
        if (cmd == "simmat") return cmdSimmat(run);
        if (cmd == "gradcheck") return cmdGradCheck(run);
        if (cmd == "ablate-alpha") return cmdAblateAlpha(run);
        if (cmd == "ablate-nm") return cmdAblateNm(run);
        return cmdAblateSampling(run);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "%s\n",
                     Json{{"error", e.what()}, {"type", "config"}}.dump().c_str());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "%s\n",
                     Json{{"error", e.what()}, {"type", "runtime"}}.dump().c_str());
        return 1;
    }
}
