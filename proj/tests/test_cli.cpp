#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli_app.hpp"
#include "test_support.hpp"

using namespace centaur;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result invoke(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path write_config(const fs::path& dir, const std::string& name, const json& cfg) {
    const auto p = dir / (name + ".json");
    std::ofstream(p) << cfg.dump(2);
    return p;
}

json read_json(const fs::path& p) {
    std::ifstream in(p);
    return json::parse(in);
}

const json kFolds = {{"count", 5}, {"fractions", {0.8, 0.1, 0.1}}};

// Synthesizes a small description data set under dir/synth.
void synthesize(const fs::path& dir) {
    const auto cfg = write_config(dir, "synth",
                                  {{"seed", 1}, {"synth", {{"paradigm", "description"}, {"count", 120}, {"dim", 4}}}});
    REQUIRE(invoke({"embed-synth", "--config", cfg.string(), "--out", (dir / "synth").string()}).code == cli::kOk);
}

} // namespace

TEST_CASE("unknown subcommands are usage errors") {
    CHECK(invoke({"frobnicate"}).code == cli::kUsage);
    CHECK(invoke({}).code == cli::kUsage);
    CHECK(invoke({"fit"}).code == cli::kUsage);
}

TEST_CASE("a missing embedding file is named") {
    const auto dir = testing::scratch_dir("cli_missing");
    synthesize(dir);
    const auto cfg = write_config(dir, "fit",
                                  {{"seed", 2}, {"trials", "synth/trials.jsonl"}, {"embeddings", "nowhere.cntr"}});
    const auto r = invoke({"fit", "--config", cfg.string(), "--out", (dir / "fit").string()});
    CHECK(r.code == cli::kValidation);
    CHECK(r.err.find("nowhere.cntr") != std::string::npos);
}

TEST_CASE("a configuration without a seed is rejected") {
    const auto dir = testing::scratch_dir("cli_seed");
    const auto cfg = write_config(dir, "synth", {{"synth", {{"paradigm", "description"}, {"count", 10}, {"dim", 2}}}});
    CHECK(invoke({"embed-synth", "--config", cfg.string(), "--out", (dir / "o").string()}).code == cli::kValidation);
    CHECK(invoke({"embed-synth", "--config", cfg.string(), "--seed", "4", "--out", (dir / "o").string()}).code ==
          cli::kOk);
}

TEST_CASE("fit, baseline and report on synthetic data") {
    const auto dir = testing::scratch_dir("cli_flow");
    synthesize(dir);
    const auto fit_cfg = write_config(dir, "fit",
                                      {{"seed", 3},
                                       {"trials", "synth/trials.jsonl"},
                                       {"embeddings", "synth/embeddings.cntr"},
                                       {"folds", kFolds},
                                       {"alpha_grid", {0.0, 0.1}}});
    REQUIRE(invoke({"fit", "--config", fit_cfg.string(), "--out", (dir / "fit").string()}).code == cli::kOk);
    const auto fit = read_json(dir / "fit" / "fit_report.json");
    CHECK(std::isfinite(fit["aggregate_test_nll"].get<double>()));
    CHECK(fit["config"]["seed"] == 3);

    const auto base_cfg =
        write_config(dir, "random", {{"seed", 3}, {"trials", "synth/trials.jsonl"}, {"folds", kFolds}});
    REQUIRE(invoke({"baseline", "--config", base_cfg.string(), "--out", (dir / "random").string()}).code == cli::kOk);

    const auto report_cfg = write_config(
        dir, "report", {{"seed", 0}, {"report", {{"inputs", {"random/fit_report.json", "fit/fit_report.json"}}}}});
    REQUIRE(invoke({"report", "--config", report_cfg.string(), "--out", (dir / "report").string()}).code == cli::kOk);
    const auto rows = read_json(dir / "report" / "report.json")["rows"];
    REQUIRE(rows.size() == 2);
    CHECK(rows[0]["aggregate_test_nll"].get<double>() <= rows[1]["aggregate_test_nll"].get<double>());
    CHECK(rows[0]["rank"] == 1);
    CHECK(fs::exists(dir / "report" / "manifest.json"));
}

TEST_CASE("outputs may not overwrite inputs") {
    const auto dir = testing::scratch_dir("cli_clobber");
    synthesize(dir);
    const auto cfg = write_config(dir, "prompts", {{"seed", 1}, {"trials", "synth/trials.jsonl"}});
    CHECK(invoke({"prompts", "--config", cfg.string(), "--out", (dir / "synth").string()}).code == cli::kOk);
    const auto again = write_config(dir, "fit",
                                    {{"seed", 1},
                                     {"trials", "synth/trials.jsonl"},
                                     {"embeddings", "synth/embeddings.cntr"},
                                     {"folds", kFolds},
                                     {"alpha_grid", {0.0}}});
    CHECK(invoke({"fit", "--config", again.string(), "--out", (dir / "synth").string()}).code == cli::kOk);
    const auto clobber = write_config(dir, "clobber",
                                      {{"seed", 1}, {"report", {{"inputs", {"synth/fit_report.json"}}}}});
    CHECK(invoke({"report", "--config", clobber.string(), "--out", (dir / "synth").string()}).code == cli::kOk);
    const auto self = write_config(dir, "self",
                                   {{"seed", 1}, {"report", {{"inputs", {"synth/report.json"}}}}});
    CHECK(invoke({"report", "--config", self.string(), "--out", (dir / "synth").string()}).code == cli::kValidation);
}

TEST_CASE("a manifest reproduces its run") {
    const auto dir = testing::scratch_dir("cli_manifest");
    synthesize(dir);
    const auto manifest = dir / "synth" / "manifest.json";
    REQUIRE(invoke({"embed-synth", "--config", manifest.string(), "--out", (dir / "again").string()}).code == cli::kOk);
    for (const auto& entry : fs::directory_iterator(dir / "synth")) {
        std::ifstream a(entry.path(), std::ios::binary), b(dir / "again" / entry.path().filename(), std::ios::binary);
        std::stringstream sa, sb;
        sa << a.rdbuf();
        sb << b.rdbuf();
        CHECK(sa.str() == sb.str());
    }
    CHECK(invoke({"fit", "--config", manifest.string(), "--out", (dir / "wrong").string()}).code == cli::kValidation);
}
