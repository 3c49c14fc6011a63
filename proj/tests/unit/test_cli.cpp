#include <gtest/gtest.h>

#include <regex>
#include <sstream>
#include <sys/wait.h>

#include "duodet/cli/app.hpp"
#include "support.hpp"

using namespace duodet;
using testing_support::TempDir;
using testing_support::write_text;

namespace {

const std::string kManifest = std::string(DUODET_DATA_DIR) + "/toy_paired/manifest.jsonl";

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args)
{
    args.insert(args.begin(), "duodet");
    std::vector<const char*> argv;
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    std::ostringstream out, err;
    const int code = dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string error_of(const nlohmann::json& j)
{
    try {
        parse_config_json(j);
    } catch (const ValidationError& e) {
        return e.what();
    }
    return "";
}

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& p)
{
    std::ifstream in(p);
    std::vector<nlohmann::json> out;
    for (std::string line; std::getline(in, line);) {
        if (!line.empty()) {
            out.push_back(nlohmann::json::parse(line));
        }
    }
    return out;
}

/// Small, fast training config against the toy fixture.
nlohmann::json small_config(const std::filesystem::path& dir)
{
    return {{"manifest", kManifest},
            {"epochs", 2},
            {"batch_size", 4},
            {"input_size", 64},
            {"max_steps", 2},
            {"checkpoint_dir", dir.string()},
            {"model", {{"stem_channels", 4}, {"channels", {8, 8, 8}}, {"blocks_per_stage", 1}, {"head_channels", 4}}}};
}

}   // namespace

TEST(ParseConfig, MinimalConfigEchoesEveryValue)
{
    const auto c = parse_config_json({{"manifest", "m.jsonl"}});
    const TrainConfig defaults;
    EXPECT_EQ(c.epochs, defaults.epochs);
    EXPECT_EQ(c.batch_size, defaults.batch_size);
    EXPECT_EQ(c.aug.p_rotate, 0.3);
    EXPECT_EQ(c.aug.global_seed, c.seed);

    const auto echo = train_config_to_json(c);
    for (const char* key : {"manifest", "epochs", "batch_size", "learning_rate", "momentum", "weight_decay", "seed",
                            "input_size", "max_steps", "checkpoint_dir", "aug", "model"}) {
        EXPECT_TRUE(echo.contains(key)) << key;
    }
    for (const char* key : {"p_rotate", "rotate_range", "p_shift", "shift_range", "p_noise", "noise_sigma",
                            "p_brightness", "brightness_range", "p_edge", "edge_strength", "p_blur",
                            "blur_sigma_range", "p_mosaic", "p_one_sided", "min_area_frac", "global_seed"}) {
        EXPECT_TRUE(echo["aug"].contains(key)) << key;
    }
    // Echo reproduces the config.
    EXPECT_EQ(train_config_to_json(parse_config_json(echo)), echo);
}

TEST(ParseConfig, UnknownKeyIsNamed)
{
    const auto msg = error_of({{"manifest", "m"}, {"aug", {{"p_rotat", 0.3}}}});
    EXPECT_NE(msg.find("p_rotat"), std::string::npos) << msg;
    EXPECT_NE(error_of({{"manifest", "m"}, {"lr", 0.1}}).find("lr"), std::string::npos);
}

TEST(ParseConfig, ProbabilityBoundIsNamed)
{
    const auto msg = error_of({{"manifest", "m"}, {"aug", {{"p_rotate", 1.5}}}});
    EXPECT_NE(msg.find("p_rotate"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[0,1]"), std::string::npos) << msg;
}

TEST(ParseConfig, MissingFileAndBadJson)
{
    TempDir dir("cfg");
    EXPECT_THROW(parse_config(dir / "nope.json"), ValidationError);
    write_text(dir / "bad.json", "{\"manifest\": ");
    EXPECT_THROW(parse_config(dir / "bad.json"), ValidationError);
    EXPECT_THROW(parse_config_json({{"epochs", 3}}), ValidationError);
}

TEST(ParseConfig, RelativeManifestResolvedAgainstConfig)
{
    TempDir dir("cfg_rel");
    write_text(dir / "sub/c.json", R"({"manifest": "../data/m.jsonl"})");
    EXPECT_EQ(parse_config(dir / "sub/c.json").manifest, (dir / "data/m.jsonl").string());
}

TEST(Dispatch, NoArgumentsPrintsUsage)
{
    const auto r = run({});
    EXPECT_EQ(r.code, 1);
    for (const auto& cmd : cli::subcommands()) {
        EXPECT_NE(r.err.find(cmd), std::string::npos) << cmd;
    }
    EXPECT_EQ(cli::subcommands().size(), 7u);
}

TEST(Dispatch, UnknownCommandAndBadFlags)
{
    const auto r = run({"frobnicate"});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("usage"), std::string::npos);
    EXPECT_EQ(run({"eval", "--checkpoint"}).code, 1);
    EXPECT_EQ(run({"ensemble", "--inputs", "/nonexistent", "--out", "x"}).code, 1);
}

TEST(Dispatch, HelpAndVersion)
{
    EXPECT_EQ(run({"--help"}).code, 0);
    const auto v = run({"--version"});
    EXPECT_EQ(v.code, 0);
    EXPECT_NE(v.out.find(kVersion), std::string::npos);
    EXPECT_EQ(run({"train", "--help"}).code, 0);
}

TEST(Dispatch, ValidationErrorExitsOne)
{
    TempDir dir("cli_bad");
    auto cfg = small_config(dir.path());
    cfg["aug"] = {{"p_rotate", 1.5}};
    write_text(dir / "c.json", cfg.dump());
    const auto r = run({"train", "--config", (dir / "c.json").string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("p_rotate"), std::string::npos);
}

TEST(Dispatch, TrainThenEvalPrintsMapLine)
{
    TempDir dir("cli_eval");
    write_text(dir / "c.json", small_config(dir / "run").dump());
    const auto t = run({"train", "--config", (dir / "c.json").string()});
    ASSERT_EQ(t.code, 0) << t.err;
    const auto ckpt = dir / "run/last.ckpt";
    ASSERT_TRUE(std::filesystem::exists(ckpt));

    const auto log = read_jsonl(dir / "run/train.log");
    ASSERT_EQ(log.size(), 2u);
    EXPECT_EQ(log[0]["version"], kVersion);
    EXPECT_EQ(log[0]["seed"], 0);
    EXPECT_EQ(log[0]["config"]["max_steps"], 2);

    const auto e = run({"eval", "--checkpoint", ckpt.string(), "--manifest", kManifest});
    ASSERT_EQ(e.code, 0) << e.err;
    std::smatch m;
    ASSERT_TRUE(std::regex_search(e.out, m, std::regex(R"(mAP@0\.50 = ([0-9.]+))"))) << e.out;
    const double map = std::stod(m[1]);
    EXPECT_GE(map, 0.0);
    EXPECT_LE(map, 1.0);

    // Same inputs, same output.
    const auto e2 = run({"eval", "--checkpoint", ckpt.string(), "--manifest", kManifest});
    EXPECT_EQ(e.out, e2.out);
}

TEST(Dispatch, NonFiniteTrainingExitsTwoAndLogsStep)
{
    TempDir dir("cli_nan");
    auto cfg = small_config(dir / "run");
    cfg["learning_rate"] = 1e30;
    cfg["max_steps"] = 20;
    cfg["epochs"] = 20;
    write_text(dir / "c.json", cfg.dump());
    const auto r = run({"train", "--config", (dir / "c.json").string()});
    EXPECT_EQ(r.code, 2) << r.err;
    std::smatch m;
    ASSERT_TRUE(std::regex_search(r.err, m, std::regex(R"(non-finite loss at step (\d+))"))) << r.err;
    const auto log = read_jsonl(dir / "run/train.log");
    ASSERT_FALSE(log.empty());
    const std::string err = log.back()["result"]["error"];
    EXPECT_NE(err.find("step " + m[1].str()), std::string::npos);
}

TEST(Dispatch, RunDirEnvironmentOverride)
{
    TempDir dir("cli_env");
    write_text(dir / "c.json", small_config(dir / "ignored").dump());
    ::setenv(kRunDirEnv, (dir / "env").c_str(), 1);
    const auto r = run({"train", "--config", (dir / "c.json").string(), "--max-steps", "1"});
    ::unsetenv(kRunDirEnv);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(std::filesystem::exists(dir / "env/last.ckpt"));
    EXPECT_TRUE(std::filesystem::exists(dir / "env/train.log"));
    EXPECT_FALSE(std::filesystem::exists(dir / "ignored"));
}

TEST(Binary, ExitCodes)
{
    const std::string exe = DUODET_CLI_PATH;
    auto status = [](const std::string& cmd) {
        const int s = std::system((cmd + " >/dev/null 2>&1").c_str());
        return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
    };
    EXPECT_EQ(status(exe), 1);
    EXPECT_EQ(status(exe + " --version"), 0);
    EXPECT_EQ(status(exe + " nonsense"), 1);
}
