// Command-line front end: one subcommand per pipeline stage plus a local
// newline-delimited JSON query service.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "genr/pipeline.hpp"

namespace {

genr::WhichModel parse_model(const std::string& name) {
    if (name == "sft") return genr::WhichModel::sft;
    if (name == "dpo") return genr::WhichModel::dpo;
    throw genr::UsageError("--model must be sft or dpo");
}

std::vector<uint32_t> parse_beams(const std::string& list) {
    std::vector<uint32_t> beams;
    std::string part;
    std::istringstream in(list);
    while (std::getline(in, part, ',')) {
        if (part.empty()) continue;
        beams.push_back(static_cast<uint32_t>(std::stoul(part)));
    }
    if (beams.empty()) throw genr::UsageError("--beam-sweep needs a comma-separated list");
    return beams;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"generative retrieval with preference optimization"};
    app.require_subcommand(1);

    std::string config_path = "genr.conf";
    app.add_option("-c,--config", config_path, "pipeline config file (key=value or JSON)");

    auto* gen = app.add_subcommand("gen-synthetic", "generate a seeded synthetic catalog and click log");
    auto* corpus = app.add_subcommand("build-corpus", "canonicalize titles into multi-span identifiers");
    auto* index = app.add_subcommand("build-index", "build the FM-index over the span corpus");
    auto* sft = app.add_subcommand("train-sft", "supervised fine-tuning on clicked (query, span) pairs");
    auto* prefs = app.add_subcommand("build-prefs", "construct preference pairs from click logs");
    auto* dpo = app.add_subcommand("train-dpo", "preference-align the SFT model against a frozen reference");

    auto* decode = app.add_subcommand("decode", "constrained beam search for one query");
    std::string query;
    uint32_t beam_flag = 0;
    size_t topk_items = 10;
    std::string model_name = "dpo";
    decode->add_option("-q,--query", query, "query text")->required();
    decode->add_option("-b,--beam", beam_flag, "beam size override");
    decode->add_option("-k,--items", topk_items, "items to return");
    decode->add_option("-m,--model", model_name, "which model: sft or dpo");

    auto* eval = app.add_subcommand("eval", "Recall@K over held-out clicks with long-tail buckets");
    std::string eval_model = "dpo";
    std::string beam_sweep;
    eval->add_option("-m,--model", eval_model, "which model: sft or dpo");
    eval->add_option("--beam-sweep", beam_sweep, "comma-separated beam sizes for the sweep CSV");

    auto* serve = app.add_subcommand("serve", "newline-delimited JSON query service on stdin/stdout");
    std::string serve_model = "dpo";
    serve->add_option("-m,--model", serve_model, "which model: sft or dpo");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        genr::PipelineConfig config = genr::PipelineConfig::from_file(config_path);
        genr::StageSummary summary;
        if (gen->parsed()) summary = genr::run_gen_synthetic(config);
        else if (corpus->parsed()) summary = genr::run_build_corpus(config);
        else if (index->parsed()) summary = genr::run_build_index(config);
        else if (sft->parsed()) summary = genr::run_train_sft(config);
        else if (prefs->parsed()) summary = genr::run_build_prefs(config);
        else if (dpo->parsed()) summary = genr::run_train_dpo(config);
        else if (decode->parsed()) {
            std::optional<uint32_t> beam;
            if (beam_flag > 0) beam = beam_flag;
            summary = genr::run_decode(config, query, beam, topk_items, parse_model(model_name),
                                       std::cout);
        } else if (eval->parsed()) {
            std::vector<uint32_t> beams;
            if (!beam_sweep.empty()) beams = parse_beams(beam_sweep);
            summary = genr::run_eval_stage(config, parse_model(eval_model), beams);
        } else if (serve->parsed()) {
            genr::serve_loop(config, parse_model(serve_model), std::cin, std::cout);
            return 0;
        }
        std::cout << summary.json << "\n";
        return 0;
    } catch (const genr::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const genr::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const genr::InternalError& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
}
