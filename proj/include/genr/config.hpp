#pragma once

#include <string>
#include <vector>

#include "genr/aligner.hpp"
#include "genr/decoder.hpp"
#include "genr/synthetic.hpp"

namespace genr {

// Resolved pipeline configuration. Accepts flat key=value files (dotted
// keys) or JSON with the same nesting; GENR_ARTIFACTS overrides the
// artifacts directory without affecting the config hash.
struct PipelineConfig {
    std::string catalog_path = "data/catalog.jsonl";
    std::string clicks_path = "data/clicks.tsv";
    std::string lexicon_path = "data/lexicon.txt";
    std::string artifacts_dir = "artifacts";

    uint32_t span_len = 8;  // l
    TaskMode task = TaskMode::multi_span;

    ModelDims dims;  // vocab filled from the corpus at train time

    TrainConfig sft;   // uses sft_lr/batch/epochs/seed
    TrainConfig dpo;   // uses dpo_lr/beta/batch/epochs/seed
    uint32_t pref_ratio = 1;
    double pref_holdout = 0.1;  // preference pairs kept aside for accuracy reporting

    DecodeConfig decode;
    std::vector<size_t> eval_k = {10, 50};
    double eval_holdout = 0.2;  // temporal click split for ground truth

    uint64_t seed = 42;
    SyntheticConfig synthetic;

    uint64_t config_hash = 0;  // FNV-1a of the raw config file bytes
    std::string echo_json;     // canonical JSON of the resolved config

    static PipelineConfig defaults();
    static PipelineConfig from_file(const std::string& path);

    std::string hash_hex() const;
};

}  // namespace genr
