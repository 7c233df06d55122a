#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"

namespace {

namespace fs = std::filesystem;

const std::string kCli = CALM_CLI_PATH;
const std::string kData = CALM_DATA_DIR;

fs::path work_dir() {
    auto dir = fs::temp_directory_path() / "calm_cli_tests";
    fs::create_directories(dir);
    return dir;
}

int run_cli(const std::string& args) {
    auto cmd = kCli + " " + args + " 2>/dev/null";
    int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

std::string capture_stdout(const std::string& args) {
    auto cmd = kCli + " " + args + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string out;
    char buf[4096];
    while (size_t n = fread(buf, 1, sizeof(buf), pipe)) out.append(buf, n);
    pclose(pipe);
    return out;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

TEST_CASE("no arguments or unknown flags are usage errors (exit 2)") {
    CHECK(run_cli("") == 2);
    CHECK(run_cli("frobnicate") == 2);
    CHECK(run_cli("run --no-such-flag") == 2);
    CHECK(run_cli("--help") == 0);
}

TEST_CASE("inner errors exit 1 with a diagnostic") {
    CHECK(run_cli("run --config /does/not/exist.json --queries x --out y") == 1);
    CHECK(run_cli("index --corpus /does/not/exist.jsonl --out " +
                  (work_dir() / "idx.json").string()) == 1);
}

TEST_CASE("index command writes a loadable index") {
    auto out = work_dir() / "bench.index.json";
    CHECK(run_cli("index --corpus " + kData + "/bench/corpus.jsonl --out " + out.string()) == 0);
    auto j = nlohmann::json::parse(read_file(out));
    CHECK(j.contains("postings"));
}

TEST_CASE("run, baseline and eval produce reports on the benchmark fixture") {
    auto dir = work_dir();
    auto trace = dir / "calm.trace.jsonl";
    auto base_trace = dir / "baseline.trace.jsonl";
    auto report = dir / "calm.report.json";
    auto base_report = dir / "baseline.report.json";
    std::string config = kData + "/bench/config.json";
    std::string queries = kData + "/bench/queries.jsonl";
    std::string gold = kData + "/bench/gold.jsonl";
    std::string corpus = kData + "/bench/corpus.jsonl";

    REQUIRE(run_cli("run --config " + config + " --queries " + queries + " --out " +
                    trace.string()) == 0);
    REQUIRE(run_cli("baseline --config " + config + " --queries " + queries + " --out " +
                    base_trace.string()) == 0);
    REQUIRE(run_cli("eval --trace " + trace.string() + " --gold " + gold + " --corpus " +
                    corpus + " --style asqa --judge substring --out " + report.string()) == 0);
    REQUIRE(run_cli("eval --trace " + base_trace.string() + " --gold " + gold + " --corpus " +
                    corpus + " --style asqa --judge substring --out " + base_report.string()) ==
            0);

    auto calm_means = nlohmann::json::parse(read_file(report)).at("means");
    auto base_means = nlohmann::json::parse(read_file(base_report)).at("means");
    CHECK(calm_means.at("em_recall").get<double>() >= base_means.at("em_recall").get<double>());
    CHECK(calm_means.at("citation_precision").get<double>() >
          base_means.at("citation_precision").get<double>());

    // idempotence: identical inputs, identical bytes
    auto trace2 = dir / "calm.trace2.jsonl";
    REQUIRE(run_cli("run --config " + config + " --queries " + queries + " --out " +
                    trace2.string() + " --jobs 4") == 0);
    CHECK(read_file(trace) == read_file(trace2));
}

TEST_CASE("replay prints rounds in the access-line format") {
    auto dir = work_dir();
    auto trace = dir / "casestudy.trace.jsonl";
    REQUIRE(run_cli("run --config " + kData + "/casestudy/config_replay.json --queries " +
                    kData + "/casestudy/queries.jsonl --out " + trace.string()) == 0);
    auto out = capture_stdout("replay --trace " + trace.string() + " --qid cs1");
    CHECK(out.find("Round 1") != std::string::npos);
    CHECK(out.find("Access to: Document 1,2,3,4,5") != std::string::npos);
    CHECK(out.find("Verifier access to: Document 1,4,5") != std::string::npos);
    CHECK(out.find("Access to: Document 1,4,5,6,7") != std::string::npos);
    CHECK(run_cli("replay --trace " + trace.string() + " --qid missing") == 1);
}

TEST_CASE("sensitivity command writes a full report") {
    auto dir = work_dir();
    auto out = dir / "sensitivity.report.json";
    REQUIRE(run_cli("sensitivity --config " + kData + "/sensitivity/config.json --queries " +
                    kData + "/sensitivity/queries.jsonl --gold " + kData +
                    "/sensitivity/gold.jsonl --targets 0.27,0.56,0.78 --seed 42 --out " +
                    out.string()) == 0);
    auto j = nlohmann::json::parse(read_file(out));
    CHECK(j.contains("p_low"));
    CHECK(j.contains("second_order_ratio"));
    CHECK_FALSE(j.at("partial").get<bool>());
}
