#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "genr/config.hpp"
#include "genr/eval.hpp"

namespace genr {

// Stage drivers shared by the CLI and the test suites. Every stage writes
// its artifact plus a sidecar <artifact>.meta.json carrying the config hash;
// consumers refuse artifacts whose recorded hash differs from the current
// config so stale pipelines fail loudly instead of silently mixing outputs.

struct ArtifactPaths {
    std::string corpus;
    std::string fm_index;
    std::string model_sft;
    std::string model_dpo;
    std::string preferences;
    std::string sft_log;
    std::string dpo_log;
    std::string decode_out;
    std::string eval_csv;
    std::string eval_json;
    std::string query_dist_csv;
    std::string beam_sweep_csv;

    static ArtifactPaths under(const std::string& dir);
};

void write_meta(const std::string& artifact_path, const PipelineConfig& config,
                const std::string& stage);
// Throws DataError naming the artifact when missing or hash-mismatched.
void check_meta(const std::string& artifact_path, const PipelineConfig& config);

struct StageSummary {
    std::string json;  // machine-readable one-line summary
};

StageSummary run_gen_synthetic(const PipelineConfig& config);
StageSummary run_build_corpus(const PipelineConfig& config);
StageSummary run_build_index(const PipelineConfig& config);
StageSummary run_train_sft(const PipelineConfig& config);
StageSummary run_build_prefs(const PipelineConfig& config);
StageSummary run_train_dpo(const PipelineConfig& config);

enum class WhichModel { sft, dpo };

// Decodes one query and returns the decode JSON object (spans + items).
std::string decode_query_json(const PipelineConfig& config, const ModelParams& model,
                              const FmIndex& fm, const Catalog& catalog, const std::string& query,
                              std::optional<uint32_t> beam_override, size_t k);

StageSummary run_decode(const PipelineConfig& config, const std::string& query,
                        std::optional<uint32_t> beam_override, size_t k, WhichModel which,
                        std::ostream& out);

// Decodes every held-out eval query to decode_out (one JSON line each) and
// writes the eval report; beam_sweep adds a Recall@K-vs-beam CSV.
StageSummary run_eval_stage(const PipelineConfig& config, WhichModel which,
                            const std::vector<uint32_t>& beam_sweep = {});

// Newline-delimited JSON service over arbitrary streams.
void serve_loop(const PipelineConfig& config, WhichModel which, std::istream& in,
                std::ostream& out);

// Loaded artifact bundle for decode/eval/serve paths.
struct LoadedStack {
    Catalog catalog;
    FmIndex fm;
    ModelParams model;
};
LoadedStack load_stack(const PipelineConfig& config, WhichModel which);

}  // namespace genr
