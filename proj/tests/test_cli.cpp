// End-to-end checks of the CLI binary: stage gating via artifact metadata,
// JSON summaries, exit codes, decode output and the stdin/stdout service.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "genr/common.hpp"

namespace fs = std::filesystem;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr interleaved
};

CliResult run_cli(const std::string& args, const std::string& stdin_data = "") {
    fs::path dir = fs::temp_directory_path() / "genr_cli_test";
    fs::create_directories(dir);
    std::string cmd = std::string(GENR_CLI_PATH) + " " + args + " 2>&1";
    if (!stdin_data.empty()) {
        fs::path stdin_file = dir / "stdin.txt";
        std::ofstream out(stdin_file, std::ios::trunc);
        out << stdin_data;
        out.close();
        cmd += " < " + stdin_file.string();
    }
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    CliResult result;
    std::array<char, 4096> buf;
    while (fgets(buf.data(), buf.size(), pipe) != nullptr) result.output += buf.data();
    int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

std::string last_line(const std::string& text) {
    size_t end = text.find_last_not_of('\n');
    if (end == std::string::npos) return "";
    size_t start = text.rfind('\n', end);
    return text.substr(start == std::string::npos ? 0 : start + 1, end - (start == std::string::npos ? 0 : start + 1) + 1);
}

fs::path test_root() {
    static fs::path root = [] {
        fs::path dir = fs::temp_directory_path() / "genr_cli_test" / "work";
        fs::remove_all(dir);
        fs::create_directories(dir);
        return dir;
    }();
    return root;
}

std::string write_config(const std::string& name, const std::string& extra = "") {
    fs::path root = test_root();
    std::string config =
        "paths.catalog = " + (root / "data/catalog.jsonl").string() + "\n" +
        "paths.clicks = " + (root / "data/clicks.tsv").string() + "\n" +
        "paths.lexicon = " + (root / "data/lexicon.txt").string() + "\n" +
        "paths.artifacts = " + (root / "artifacts").string() + "\n" +
        "corpus.l = 4\n"
        "model.d = 8\n"
        "model.k = 2\n"
        "model.h = 12\n"
        "sft.lr = 0.01\n"
        "sft.batch = 16\n"
        "sft.epochs = 2\n"
        "dpo.lr = 0.005\n"
        "dpo.epochs = 1\n"
        "decode.beam = 20\n"
        "eval.k = 5,10\n"
        "seed = 5\n"
        "synthetic.items = 60\n"
        "synthetic.queries = 30\n"
        "synthetic.clicks = 220\n" +
        extra;
    fs::path p = root / name;
    std::ofstream out(p, std::ios::trunc);
    out << config;
    return p.string();
}

}  // namespace

TEST_CASE("cli pipeline end to end") {
    std::string config = write_config("pipeline.conf");
    std::string base = "-c " + config + " ";

    SUBCASE("stages gate on missing upstream artifacts") {
        auto r = run_cli(base + "eval");
        CHECK(r.exit_code == 2);
        CHECK(r.output.find("missing artifact") != std::string::npos);
        CHECK(r.output.find("corpus.jsonl") != std::string::npos);
    }

    SUBCASE("full run produces JSON summaries and artifacts") {
        for (const std::string stage :
             {"gen-synthetic", "build-corpus", "build-index", "train-sft", "build-prefs",
              "train-dpo"}) {
            auto r = run_cli(base + stage);
            CAPTURE(stage);
            CAPTURE(r.output);
            REQUIRE(r.exit_code == 0);
            auto summary = nlohmann::json::parse(last_line(r.output));
            CHECK(summary["command"] == stage);
            CHECK(summary.contains("config_hash"));
        }

        auto r = run_cli(base + "eval --model sft");
        REQUIRE(r.exit_code == 0);
        auto summary = nlohmann::json::parse(last_line(r.output));
        CHECK(summary["command"] == "eval");
        CHECK(summary.contains("recall_at_5"));
        CHECK(fs::exists(test_root() / "artifacts/eval_report.csv"));
        CHECK(fs::exists(test_root() / "artifacts/query_distribution.csv"));

        // decode prints spans and items JSON
        r = run_cli(base + "decode --query \"running shoe\" --beam 10 --model sft");
        REQUIRE(r.exit_code == 0);
        std::istringstream lines(r.output);
        std::string first;
        std::getline(lines, first);
        auto decoded = nlohmann::json::parse(first);
        CHECK(decoded["query"] == "running shoe");
        CHECK(decoded.contains("spans"));
        CHECK(decoded.contains("items"));
        for (const auto& span : decoded["spans"]) {
            CHECK(span.contains("tokens"));
            CHECK(span.contains("lm"));
            CHECK(span.contains("fm"));
            CHECK(span.contains("s"));
        }

        // serve: valid request, malformed request, determinism
        std::string requests =
            std::string(R"({"query": "running shoe", "k": 3})") + "\n" +
            R"(not json)" + "\n" +
            R"({"query": ""})" + "\n" +
            R"({"query": "running shoe", "k": 3})" + "\n";
        auto served = run_cli(base + "serve --model sft", requests);
        REQUIRE(served.exit_code == 0);
        std::istringstream served_lines(served.output);
        std::vector<std::string> lines_out;
        std::string line;
        while (std::getline(served_lines, line))
            if (!line.empty() && line[0] == '{') lines_out.push_back(line);
        REQUIRE(lines_out.size() == 4);
        auto first_resp = nlohmann::json::parse(lines_out[0]);
        CHECK(first_resp.contains("items"));
        CHECK(first_resp.contains("latency_ms"));
        double prev = std::numeric_limits<double>::infinity();
        for (const auto& item : first_resp["items"]) {
            CHECK(item["score"].get<double>() <= prev);
            prev = item["score"].get<double>();
        }
        CHECK(nlohmann::json::parse(lines_out[1]).contains("error"));
        CHECK(nlohmann::json::parse(lines_out[2]).contains("error"));
        auto fourth = nlohmann::json::parse(lines_out[3]);
        CHECK(fourth["items"] == first_resp["items"]);  // stateless determinism

        // a config change invalidates downstream artifacts
        std::string changed = write_config("pipeline_changed.conf", "decode.lambda = 0.5\n");
        auto stale = run_cli("-c " + changed + " build-index");
        CHECK(stale.exit_code == 2);
        CHECK(stale.output.find("config hash") != std::string::npos);

        // usage errors exit 1
        auto bad = run_cli("-c " + config + " decode");  // missing --query
        CHECK(bad.exit_code == 1);
        auto unknown = run_cli("-c /nonexistent.conf build-corpus");
        CHECK(unknown.exit_code == 1);
    }
}
