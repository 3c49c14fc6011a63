#pragma once

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "duodet/cli/config_io.hpp"
#include "duodet/core/draw.hpp"
#include "duodet/core/error.hpp"
#include "duodet/ensemble/wbf.hpp"
#include "duodet/ingest/ingest.hpp"
#include "duodet/traineval/dataset.hpp"
#include "duodet/traineval/detections.hpp"
#include "duodet/traineval/inference.hpp"
#include "duodet/traineval/metrics.hpp"
#include "duodet/traineval/trainer.hpp"

#ifndef DUODET_VERSION
#define DUODET_VERSION "0.1.0-unknown"
#endif

namespace duodet {

inline constexpr const char* kVersion = DUODET_VERSION;
inline constexpr const char* kRunDirEnv = "DUODET_RUN_DIR";

namespace cli {

inline const std::vector<std::string>& subcommands()
{
    static const std::vector<std::string> names{"prepare-data", "augment-preview", "train",    "eval",
                                                "infer",        "ensemble",        "benchmark"};
    return names;
}

inline std::string usage()
{
    return "usage: duodet <command> [options]\n"
           "\n"
           "commands:\n"
           "  prepare-data     import a paired or RGB-only dataset into a manifest\n"
           "  augment-preview  dump before/after images of the augmentation pipeline\n"
           "  train            train a detector from a config file\n"
           "  eval             compute mAP of a checkpoint on a manifest\n"
           "  infer            detect objects in one RGB/TIR pair\n"
           "  ensemble         fuse detection files with weighted box fusion\n"
           "  benchmark        measure single-image inference throughput\n"
           "\n"
           "Run 'duodet <command> --help' for options.\n";
}

/// Directory for run logs: $DUODET_RUN_DIR when set, else `fallback`.
inline std::filesystem::path run_dir(const std::filesystem::path& fallback)
{
    if (const char* env = std::getenv(kRunDirEnv); env && *env) {
        return env;
    }
    return fallback.empty() ? std::filesystem::path(".") : fallback;
}

inline std::string utc_timestamp()
{
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Appends one JSON line to `<dir>/<command>.log`.
inline std::filesystem::path write_run_log(const std::filesystem::path& dir, const std::string& command,
                                           const nlohmann::json& config, std::uint64_t seed,
                                           const nlohmann::json& result = nullptr)
{
    std::filesystem::create_directories(dir);
    const auto path = dir / (command + ".log");
    std::ofstream out(path, std::ios::app);
    nlohmann::json rec{{"command", command}, {"version", kVersion}, {"seed", seed},
                       {"config", config},   {"time", utc_timestamp()}};
    if (!result.is_null()) {
        rec["result"] = result;
    }
    out << rec.dump() << '\n';
    return path;
}

inline std::filesystem::path parent_or_dot(const std::filesystem::path& p)
{
    return p.has_parent_path() ? p.parent_path() : std::filesystem::path(".");
}

struct PrepareArgs {
    std::string input;
    std::string format = "paired";
    int crop_size = 640;
    std::string out;
    double min_area_frac = kDefaultMinAreaFrac;
};

inline int run_prepare(const PrepareArgs& a, std::ostream& os)
{
    if (a.crop_size < kMinSampleSide) {
        throw ValidationError("--crop-size must be >= " + std::to_string(kMinSampleSide));
    }
    std::filesystem::create_directories(a.out);
    DatasetManifest m = a.format == "paired" ? import_paired(a.input, "toy", a.out)
                                              : import_rgb_only(a.input, a.crop_size, a.out, a.min_area_frac);
    const auto path = std::filesystem::path(a.out) / "manifest.jsonl";
    save_manifest(m, path);
    std::size_t boxes = 0;
    for (const auto& r : m.records) {
        boxes += r.boxes.size();
    }
    os << "wrote " << path.string() << ": " << m.records.size() << " pairs, " << boxes << " boxes, "
       << m.num_classes << " classes\n";
    write_run_log(run_dir(a.out), "prepare-data",
                  {{"input", a.input}, {"format", a.format}, {"crop_size", a.crop_size}, {"out", a.out},
                   {"min_area_frac", a.min_area_frac}},
                  0, {{"pairs", m.records.size()}, {"boxes", boxes}});
    return 0;
}

struct PreviewArgs {
    std::string manifest;
    int sample = 0;
    std::uint64_t seed = 0;
    std::uint64_t epoch = 0;
    std::string out;
    std::string config;
};

inline nlohmann::json trace_to_json(const AugmentTrace& t)
{
    static const char* ops[] = {"none", "rotate", "shift"};
    static const char* targets[] = {"both", "rgb_only", "tir_only"};
    return {{"mosaic", t.mosaic},
            {"noise_rgb", t.noise_rgb},
            {"noise_tir", t.noise_tir},
            {"brightness", t.brightness},
            {"edge", t.edge},
            {"blur", t.blur},
            {"geometric", ops[static_cast<int>(t.geometric)]},
            {"target", targets[static_cast<int>(t.target)]},
            {"angle", t.angle},
            {"dx", t.dx},
            {"dy", t.dy}};
}

inline int run_preview(const PreviewArgs& a, std::ostream& os)
{
    AugmentConfig aug;
    if (!a.config.empty()) {
        aug = parse_config(a.config).aug;
    }
    aug.global_seed = a.seed;
    const auto m = load_manifest(a.manifest);
    if (a.sample < 0 || a.sample >= static_cast<int>(m.records.size())) {
        throw ValidationError("--sample " + std::to_string(a.sample) + " out of range [0," +
                              std::to_string(m.records.size()) + ")");
    }
    const auto pool = load_samples(a.manifest, m);
    const auto& before = pool[a.sample];
    AugmentTrace trace;
    RngStream rng(aug.global_seed, a.epoch, static_cast<std::uint64_t>(a.sample));
    const auto after = apply_pipeline(before, aug, rng, pool, &trace);

    const std::filesystem::path out = a.out;
    const std::string stem = "sample" + std::to_string(a.sample);
    write_image(out / (stem + "_rgb_before.png"), draw_boxes(before.rgb, before.boxes));
    write_image(out / (stem + "_tir_before.png"), draw_boxes(before.tir, before.boxes));
    write_image(out / (stem + "_rgb_after.png"), draw_boxes(after.rgb, after.boxes));
    write_image(out / (stem + "_tir_after.png"), draw_boxes(after.tir, after.boxes));
    auto tj = trace_to_json(trace);
    tj["boxes_before"] = boxes_to_json(before.boxes);
    tj["boxes_after"] = boxes_to_json(after.boxes);
    std::ofstream(out / (stem + "_trace.json")) << tj.dump(2) << '\n';
    os << "wrote " << (out / (stem + "_*.png")).string() << "\n" << trace_to_json(trace).dump() << '\n';
    write_run_log(run_dir(out), "augment-preview",
                  {{"manifest", a.manifest}, {"sample", a.sample}, {"epoch", a.epoch}, {"aug", augment_config_to_json(aug)}},
                  a.seed);
    return 0;
}

struct TrainArgs {
    std::string config;
    int max_steps = -1;
    int log_every = 10;
};

inline int run_train(const TrainArgs& a, std::ostream& os)
{
    TrainConfig cfg = parse_config(a.config);
    if (a.max_steps >= 0) {
        cfg.max_steps = a.max_steps;
    }
    if (const char* env = std::getenv(kRunDirEnv); env && *env) {
        cfg.checkpoint_dir = env;
    }
    const auto m = load_manifest(cfg.manifest);
    if (cfg.model.num_classes == 0) {
        cfg.model.num_classes = m.num_classes;
    } else if (cfg.model.num_classes != m.num_classes) {
        throw ValidationError("model.num_classes " + std::to_string(cfg.model.num_classes) +
                              " disagrees with manifest (" + std::to_string(m.num_classes) + ")");
    }
    validate(cfg);
    const auto samples = load_samples(cfg.manifest, m, "train");
    const auto echo = train_config_to_json(cfg);
    os << "config " << echo.dump() << '\n';
    const auto log = write_run_log(cfg.checkpoint_dir, "train", echo, cfg.seed);

    const auto t0 = std::chrono::steady_clock::now();
    TrainResult r;
    try {
        r = train(samples, cfg, [&](const StepRecord& s) {
            if (a.log_every > 0 && s.step % a.log_every == 0) {
                os << "step " << s.step << " epoch " << s.epoch << " loss " << s.total << " (main " << s.main << ")\n";
            }
        });
    } catch (const RuntimeFailure& e) {
        write_run_log(cfg.checkpoint_dir, "train", echo, cfg.seed, {{"error", e.what()}});
        throw;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double last = r.steps.empty() ? 0.0 : r.steps.back().total;
    os << "trained " << r.steps.size() << " steps in " << secs << " s, final loss " << last << "\n"
       << "checkpoint " << r.checkpoint.string() << '\n';
    write_run_log(cfg.checkpoint_dir, "train", echo, cfg.seed,
                  {{"steps", r.steps.size()}, {"seconds", secs}, {"final_loss", last},
                   {"checkpoint", r.checkpoint.string()}});
    (void)log;
    return 0;
}

struct EvalArgs {
    std::string checkpoint;
    std::string manifest;
    std::string split;
    double iou = 0.5;
    std::string out;
};

inline int run_eval(const EvalArgs& a, std::ostream& os)
{
    if (!(a.iou > 0 && a.iou <= 1)) {
        throw ValidationError("--iou must be in (0,1]");
    }
    const auto ck = load_checkpoint(a.checkpoint);
    const auto m = load_manifest(a.manifest);
    if (m.num_classes != ck.config.num_classes) {
        throw ValidationError("manifest has " + std::to_string(m.num_classes) + " classes, checkpoint " +
                              std::to_string(ck.config.num_classes));
    }
    std::vector<std::vector<BoundingBox>> preds;
    std::vector<std::vector<BoundingBox>> gts;
    std::vector<Detection> dets;
    const auto t0 = std::chrono::steady_clock::now();
    for (const auto& r : m.records) {
        if (!a.split.empty() && r.split != a.split) {
            continue;
        }
        const auto s = load_sample(a.manifest, r);
        preds.push_back(infer(ck, s));
        gts.push_back(s.boxes);
        for (const auto& b : preds.back()) {
            dets.push_back({image_id_of(r.rgb_path), b});
        }
    }
    auto report = evaluate_map(preds, gts, m.num_classes, a.iou);
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& [cls, ap] : report.ap) {
        const std::string name = cls < static_cast<int>(m.class_names.size()) ? m.class_names[cls] : std::to_string(cls);
        os << "AP[" << name << "] = " << ap << " (tp " << report.counts[cls].tp << ", fp " << report.counts[cls].fp << ", fn " << report.counts[cls].fn << ")\n";
    }
    char line[64];
    std::snprintf(line, sizeof line, "mAP@%.2f = %.6f", a.iou, report.map);
    os << line << '\n';
    if (!a.out.empty()) {
        write_detections(a.out, dets);
    }
    nlohmann::json ap;
    for (const auto& [cls, v] : report.ap) {
        ap[std::to_string(cls)] = v;
    }
    write_run_log(run_dir(parent_or_dot(a.checkpoint)), "eval",
                  {{"checkpoint", a.checkpoint}, {"manifest", a.manifest}, {"split", a.split}, {"iou", a.iou},
                   {"model", model_config_to_json(ck.config)}},
                  0, {{"map", report.map}, {"ap", ap}, {"images", gts.size()}});
    return 0;
}

struct InferArgs {
    std::string checkpoint;
    std::string rgb;
    std::string tir;
    std::string out;
};

inline int run_infer(const InferArgs& a, std::ostream& os)
{
    const auto ck = load_checkpoint(a.checkpoint);
    PairedSample s;
    s.rgb = read_rgb(a.rgb);
    s.tir = read_gray(a.tir);
    if (auto v = validate_sample(s); !v.empty()) {
        throw ValidationError("input pair invalid: " + v.front());
    }
    std::vector<Detection> dets;
    for (const auto& b : infer(ck, s)) {
        dets.push_back({image_id_of(a.rgb), b});
    }
    write_detections(a.out, dets);
    os << "wrote " << dets.size() << " detections to " << a.out << '\n';
    write_run_log(run_dir(parent_or_dot(a.out)), "infer",
                  {{"checkpoint", a.checkpoint}, {"rgb", a.rgb}, {"tir", a.tir}, {"out", a.out},
                   {"model", model_config_to_json(ck.config)}},
                  0, {{"detections", dets.size()}});
    return 0;
}

struct EnsembleArgs {
    std::vector<std::string> inputs;
    std::vector<double> weights;
    double iou = 0.55;
    std::string out;
};

inline int run_ensemble(EnsembleArgs a, std::ostream& os)
{
    if (a.weights.empty()) {
        a.weights.assign(a.inputs.size(), 1.0);
    }
    std::vector<std::filesystem::path> files(a.inputs.begin(), a.inputs.end());
    const auto stats = ensemble_run(files, a.weights, a.iou, a.out);
    os << "fused " << stats.boxes_in << " boxes over " << stats.images << " images into " << stats.boxes_out
       << " (" << a.out << ")\n";
    if (stats.image_mismatches > 0) {
        os << "warning: " << stats.image_mismatches << " image/model pairs had no detections file entry\n";
    }
    write_run_log(run_dir(parent_or_dot(a.out)), "ensemble",
                  {{"inputs", a.inputs}, {"weights", a.weights}, {"iou", a.iou}, {"out", a.out}}, 0,
                  {{"boxes_in", stats.boxes_in}, {"boxes_out", stats.boxes_out}, {"images", stats.images}});
    return 0;
}

struct BenchmarkArgs {
    std::string checkpoint;
    int size = 0;
    int iters = 20;
    int warmup = 2;
};

inline int run_benchmark(const BenchmarkArgs& a, std::ostream& os)
{
    const auto ck = load_checkpoint(a.checkpoint);
    const int size = a.size > 0 ? a.size : ck.input_size;
    const auto r = benchmark_fps(ck.params, ck.config, size, a.iters, a.warmup);
    os << "fps = " << r.fps << " (median " << r.median_seconds * 1e3 << " ms, " << size << "x" << size << ", "
       << r.hardware << ")\n";
    write_run_log(run_dir(parent_or_dot(a.checkpoint)), "benchmark",
                  {{"checkpoint", a.checkpoint}, {"size", size}, {"iters", a.iters}, {"warmup", a.warmup}}, 0,
                  {{"fps", r.fps}, {"median_seconds", r.median_seconds}, {"hardware", r.hardware}});
    return 0;
}

}   // namespace cli

/// Entry point of the `duodet` binary. Exit codes: 0 success, 1 invalid
/// input or usage, 2 runtime failure.
inline int dispatch(int argc, const char* const* argv, std::ostream& os = std::cout, std::ostream& es = std::cerr)
{
    if (argc < 2) {
        es << cli::usage();
        return 1;
    }
    const std::string cmd = argv[1];
    if (cmd == "--help" || cmd == "-h") {
        os << cli::usage();
        return 0;
    }
    if (cmd == "--version") {
        os << "duodet " << kVersion << '\n';
        return 0;
    }

    CLI::App app{"duodet " + cmd, "duodet " + cmd};
    cli::PrepareArgs prep;
    cli::PreviewArgs prev;
    cli::TrainArgs tr;
    cli::EvalArgs ev;
    cli::InferArgs inf;
    cli::EnsembleArgs ens;
    cli::BenchmarkArgs bench;
    std::function<int()> run;

    if (cmd == "prepare-data") {
        app.add_option("--input", prep.input, "dataset directory")->required()->check(CLI::ExistingDirectory);
        app.add_option("--format", prep.format, "paired | rgb-only")->check(CLI::IsMember({"paired", "rgb-only"}));
        app.add_option("--crop-size", prep.crop_size, "crop side for rgb-only import");
        app.add_option("--min-area-frac", prep.min_area_frac, "drop clipped boxes below this area fraction");
        app.add_option("--out", prep.out, "output directory")->required();
        run = [&] { return cli::run_prepare(prep, os); };
    } else if (cmd == "augment-preview") {
        app.add_option("--manifest", prev.manifest)->required()->check(CLI::ExistingFile);
        app.add_option("--sample", prev.sample, "record index");
        app.add_option("--seed", prev.seed);
        app.add_option("--epoch", prev.epoch);
        app.add_option("--config", prev.config, "training config supplying the aug section")->check(CLI::ExistingFile);
        app.add_option("--out", prev.out)->required();
        run = [&] { return cli::run_preview(prev, os); };
    } else if (cmd == "train") {
        app.add_option("--config", tr.config)->required();
        app.add_option("--max-steps", tr.max_steps, "override max_steps");
        app.add_option("--log-every", tr.log_every);
        run = [&] { return cli::run_train(tr, os); };
    } else if (cmd == "eval") {
        app.add_option("--checkpoint", ev.checkpoint)->required()->check(CLI::ExistingFile);
        app.add_option("--manifest", ev.manifest)->required()->check(CLI::ExistingFile);
        app.add_option("--split", ev.split, "only records of this split (default: all)");
        app.add_option("--iou", ev.iou, "match threshold");
        app.add_option("--out", ev.out, "also write detections here");
        run = [&] { return cli::run_eval(ev, os); };
    } else if (cmd == "infer") {
        app.add_option("--checkpoint", inf.checkpoint)->required()->check(CLI::ExistingFile);
        app.add_option("--rgb", inf.rgb)->required()->check(CLI::ExistingFile);
        app.add_option("--tir", inf.tir)->required()->check(CLI::ExistingFile);
        app.add_option("--out", inf.out)->required();
        run = [&] { return cli::run_infer(inf, os); };
    } else if (cmd == "ensemble") {
        app.add_option("--inputs", ens.inputs)->required()->check(CLI::ExistingFile);
        app.add_option("--weights", ens.weights, "one per input (default: all 1)");
        app.add_option("--iou", ens.iou);
        app.add_option("--out", ens.out)->required();
        run = [&] { return cli::run_ensemble(ens, os); };
    } else if (cmd == "benchmark") {
        app.add_option("--checkpoint", bench.checkpoint)->required()->check(CLI::ExistingFile);
        app.add_option("--size", bench.size, "input side (default: training size)");
        app.add_option("--iters", bench.iters);
        app.add_option("--warmup", bench.warmup);
        run = [&] { return cli::run_benchmark(bench, os); };
    } else {
        es << "unknown command '" << cmd << "'\n" << cli::usage();
        return 1;
    }

    try {
        app.parse(argc - 1, argv + 1);
    } catch (const CLI::CallForHelp&) {
        os << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        es << "duodet " << cmd << ": " << e.what() << '\n';
        return 1;
    }
    try {
        return run();
    } catch (const ValidationError& e) {
        es << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        es << "failed: " << e.what() << '\n';
        return 2;
    }
}

}   // namespace duodet
