#include "genr/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

namespace genr {
namespace fs = std::filesystem;

ArtifactPaths ArtifactPaths::under(const std::string& dir) {
    ArtifactPaths p;
    p.corpus = dir + "/corpus.jsonl";
    p.fm_index = dir + "/fm.idx";
    p.model_sft = dir + "/model_sft.bin";
    p.model_dpo = dir + "/model_dpo.bin";
    p.preferences = dir + "/prefs.jsonl";
    p.sft_log = dir + "/sft_log.csv";
    p.dpo_log = dir + "/dpo_log.csv";
    p.decode_out = dir + "/decode_eval.jsonl";
    p.eval_csv = dir + "/eval_report.csv";
    p.eval_json = dir + "/eval_report.json";
    p.query_dist_csv = dir + "/query_distribution.csv";
    p.beam_sweep_csv = dir + "/beam_sweep.csv";
    return p;
}

void write_meta(const std::string& artifact_path, const PipelineConfig& config,
                const std::string& stage) {
    nlohmann::json meta;
    meta["config_hash"] = config.hash_hex();
    meta["stage"] = stage;
    meta["version"] = 1;
    write_file_bytes(artifact_path + ".meta.json", meta.dump() + "\n");
}

void check_meta(const std::string& artifact_path, const PipelineConfig& config) {
    if (!fs::exists(artifact_path))
        throw DataError("missing artifact: " + artifact_path +
                        " (run the stage that produces it first)");
    std::string meta_path = artifact_path + ".meta.json";
    if (!fs::exists(meta_path)) throw DataError("missing artifact metadata: " + meta_path);
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(read_file_bytes(meta_path));
    } catch (const nlohmann::json::exception& e) {
        throw DataError("corrupt artifact metadata " + meta_path + ": " + e.what());
    }
    std::string recorded = meta.value("config_hash", "");
    if (recorded != config.hash_hex())
        throw DataError("artifact " + artifact_path + " was built with config hash " + recorded +
                        " but the current config hashes to " + config.hash_hex() +
                        "; rebuild upstream stages");
}

namespace {

std::string summary_line(const std::string& command, nlohmann::json fields,
                         const PipelineConfig& config) {
    fields["command"] = command;
    fields["config_hash"] = config.hash_hex();
    return fields.dump();
}

void ensure_dir(const std::string& dir) {
    if (dir.empty()) return;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create directory " + dir + ": " + ec.message());
}

std::vector<SftSample> training_samples(const PipelineConfig& config, const Catalog& catalog) {
    auto clicks = ingest_clicks(config.clicks_path, catalog);
    auto [train, heldout] = temporal_split(clicks, config.eval_holdout);
    std::vector<SftSample> samples;
    for (const auto& ev : train) {
        if (ev.label != ClickLabel::clicked) continue;
        auto expanded = expand_pairs(ev, catalog.item(ev.item_id), catalog.vocab);
        samples.insert(samples.end(), expanded.begin(), expanded.end());
    }
    if (samples.empty()) throw DataError("no clicked training samples in " + config.clicks_path);
    return samples;
}

uint32_t effective_max_span_len(const PipelineConfig& config, const FmIndex& fm) {
    if (config.decode.max_span_len > 0) return config.decode.max_span_len;
    if (config.task == TaskMode::title) return fm.max_span_len();
    return std::min<uint32_t>(config.span_len + 1, fm.max_span_len());
}

}  // namespace

StageSummary run_gen_synthetic(const PipelineConfig& config) {
    SyntheticConfig sc = config.synthetic;
    ensure_dir(fs::path(config.catalog_path).parent_path().string());
    ensure_dir(fs::path(config.clicks_path).parent_path().string());
    ensure_dir(fs::path(config.lexicon_path).parent_path().string());
    auto stats = generate_synthetic(sc, config.catalog_path, config.clicks_path,
                                    config.lexicon_path);
    nlohmann::json j{{"items", stats.items},
                     {"queries", stats.queries},
                     {"clicks", stats.click_events},
                     {"exposes", stats.expose_events},
                     {"catalog", config.catalog_path}};
    return {summary_line("gen-synthetic", std::move(j), config)};
}

StageSummary run_build_corpus(const PipelineConfig& config) {
    ensure_dir(config.artifacts_dir);
    auto paths = ArtifactPaths::under(config.artifacts_dir);
    Lexicon lexicon;
    if (fs::exists(config.lexicon_path)) lexicon = Lexicon::from_file(config.lexicon_path);
    Catalog catalog = ingest_catalog(config.catalog_path, lexicon, config.span_len, config.task);
    write_corpus(paths.corpus, catalog);
    write_meta(paths.corpus, config, "build-corpus");
    size_t spans = 0;
    for (const auto& item : catalog.items) spans += item.spans.size();
    nlohmann::json j{{"artifact", paths.corpus},
                     {"items", catalog.items.size()},
                     {"spans", spans},
                     {"vocab", catalog.vocab.size()}};
    return {summary_line("build-corpus", std::move(j), config)};
}

StageSummary run_build_index(const PipelineConfig& config) {
    auto paths = ArtifactPaths::under(config.artifacts_dir);
    check_meta(paths.corpus, config);
    Catalog catalog = load_corpus(paths.corpus);
    FmIndex fm = FmIndex::build(catalog);
    fm.save(paths.fm_index);
    write_meta(paths.fm_index, config, "build-index");
    nlohmann::json j{{"artifact", paths.fm_index},
                     {"text_tokens", fm.text_size()},
                     {"real_tokens", fm.total_real_tokens()},
                     {"vocab", fm.vocab_size()}};
    return {summary_line("build-index", std::move(j), config)};
}

StageSummary run_train_sft(const PipelineConfig& config) {
    auto paths = ArtifactPaths::under(config.artifacts_dir);
    check_meta(paths.corpus, config);
    Catalog catalog = load_corpus(paths.corpus);
    auto samples = training_samples(config, catalog);

    ModelDims dims = config.dims;
    dims.vocab = catalog.vocab.size();
    ModelParams model = ModelParams::random(dims, config.seed);
    TrainConfig tc = config.sft;
    std::ofstream log(paths.sft_log, std::ios::trunc);
    log << "epoch,step,loss\n";
    auto result = train_sft(model, samples, tc, &log);
    model.save(paths.model_sft);
    write_meta(paths.model_sft, config, "train-sft");
    nlohmann::json j{{"artifact", paths.model_sft},
                     {"samples", samples.size()},
                     {"epochs", tc.epochs},
                     {"loss_initial", result.epoch_loss.front()},
                     {"loss_final", result.epoch_loss.back()}};
    return {summary_line("train-sft", std::move(j), config)};
}

StageSummary run_build_prefs(const PipelineConfig& config) {
    auto paths = ArtifactPaths::under(config.artifacts_dir);
    check_meta(paths.corpus, config);
    Catalog catalog = load_corpus(paths.corpus);
    auto clicks = ingest_clicks(config.clicks_path, catalog);
    auto [train, heldout] = temporal_split(clicks, config.eval_holdout);
    auto pairs = build_preferences(train, catalog, config.seed, config.pref_ratio);
    if (pairs.empty()) throw DataError("click log yields no preference pairs");
    write_preferences(paths.preferences, pairs, catalog.vocab);
    write_meta(paths.preferences, config, "build-prefs");
    size_t exposed = 0;
    for (const auto& p : pairs)
        if (p.source == PairSource::exposed_vs_clicked) ++exposed;
    nlohmann::json j{{"artifact", paths.preferences},
                     {"pairs", pairs.size()},
                     {"exposed_vs_clicked", exposed},
                     {"random_vs_clicked", pairs.size() - exposed}};
    return {summary_line("build-prefs", std::move(j), config)};
}

StageSummary run_train_dpo(const PipelineConfig& config) {
    auto paths = ArtifactPaths::under(config.artifacts_dir);
    check_meta(paths.corpus, config);
    check_meta(paths.model_sft, config);
    check_meta(paths.preferences, config);
    Catalog catalog = load_corpus(paths.corpus);
    ModelParams model = ModelParams::load(paths.model_sft);
    auto pairs = load_preferences(paths.preferences, catalog.vocab);

    // Deterministic holdout for reporting preference accuracy.
    std::vector<size_t> order(pairs.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    SplitMix64 rng(config.seed + 7);
    for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    size_t n_held = std::min(pairs.size() - 1,
                             static_cast<size_t>(static_cast<double>(pairs.size()) * config.pref_holdout));
    std::vector<PreferencePair> held, train;
    for (size_t i = 0; i < order.size(); ++i)
        (i < n_held ? held : train).push_back(pairs[order[i]]);
    if (train.empty()) throw DataError("no preference pairs left for DPO training");

    double sft_acc = held.empty() ? 0.0 : preference_accuracy(model, held);
    TrainConfig tc = config.dpo;
    std::ofstream log(paths.dpo_log, std::ios::trunc);
    log << "epoch,step,loss\n";
    auto result = train_dpo(model, train, tc, &log);
    double dpo_acc = held.empty() ? 0.0 : preference_accuracy(model, held);
    model.save(paths.model_dpo);
    write_meta(paths.model_dpo, config, "train-dpo");
    nlohmann::json j{{"artifact", paths.model_dpo},
                     {"pairs_train", train.size()},
                     {"pairs_heldout", held.size()},
                     {"loss_initial", result.epoch_loss.front()},
                     {"loss_final", result.epoch_loss.back()},
                     {"heldout_accuracy_sft", sft_acc},
                     {"heldout_accuracy_dpo", dpo_acc}};
    return {summary_line("train-dpo", std::move(j), config)};
}

LoadedStack load_stack(const PipelineConfig& config, WhichModel which) {
    auto paths = ArtifactPaths::under(config.artifacts_dir);
    check_meta(paths.corpus, config);
    check_meta(paths.fm_index, config);
    const std::string& model_path =
        which == WhichModel::sft ? paths.model_sft : paths.model_dpo;
    check_meta(model_path, config);
    LoadedStack stack{load_corpus(paths.corpus), FmIndex::load(paths.fm_index),
                      ModelParams::load(model_path)};
    if (stack.model.dims.vocab != stack.fm.vocab_size())
        throw DataError("model and index disagree on vocabulary size; rebuild the pipeline");
    return stack;
}

std::string decode_query_json(const PipelineConfig& config, const ModelParams& model,
                              const FmIndex& fm, const Catalog& catalog, const std::string& query,
                              std::optional<uint32_t> beam_override, size_t k) {
    auto tokens = catalog.vocab.encode_query(tokenize(query));
    if (tokens.empty()) throw DataError("empty query");
    DecodeConfig dc = config.decode;
    dc.max_span_len = effective_max_span_len(config, fm);
    if (beam_override) dc.beam = *beam_override;
    auto spans = constrained_beam_search(model, fm, tokens, dc);
    auto scored = score_spans(spans, fm, dc.fm_weight);
    auto result = retrieve(std::move(scored), fm, k, dc.aggregation);

    nlohmann::json j;
    j["query"] = query;
    nlohmann::json spans_json = nlohmann::json::array();
    for (const auto& s : result.spans) {
        nlohmann::json sj;
        nlohmann::json toks = nlohmann::json::array();
        for (Token t : s.tokens) toks.push_back(catalog.vocab.token(t));
        sj["tokens"] = std::move(toks);
        sj["lm"] = s.lm;
        sj["fm"] = s.fm;
        sj["s"] = s.score;
        spans_json.push_back(std::move(sj));
    }
    j["spans"] = std::move(spans_json);
    nlohmann::json items_json = nlohmann::json::array();
    for (const auto& item : result.items) {
        nlohmann::json ij;
        ij["item_id"] = item.item_id;
        ij["score"] = item.score;
        ij["support"] = item.support;
        items_json.push_back(std::move(ij));
    }
    j["items"] = std::move(items_json);
    return j.dump();
}

StageSummary run_decode(const PipelineConfig& config, const std::string& query,
                        std::optional<uint32_t> beam_override, size_t k, WhichModel which,
                        std::ostream& out) {
    auto stack = load_stack(config, which);
    out << decode_query_json(config, stack.model, stack.fm, stack.catalog, query, beam_override, k)
        << "\n";
    nlohmann::json j{{"query", query}, {"k", k}};
    return {summary_line("decode", std::move(j), config)};
}

StageSummary run_eval_stage(const PipelineConfig& config, WhichModel which,
                            const std::vector<uint32_t>& beam_sweep) {
    auto stack = load_stack(config, which);
    auto paths = ArtifactPaths::under(config.artifacts_dir);
    auto clicks = ingest_clicks(config.clicks_path, stack.catalog);
    auto [train, heldout] = temporal_split(clicks, config.eval_holdout);
    auto queries = make_eval_queries(heldout, stack.catalog.vocab);
    if (queries.empty()) throw DataError("no held-out eval queries; increase eval.holdout or clicks");

    DecodeConfig dc = config.decode;
    dc.max_span_len = effective_max_span_len(config, stack.fm);

    // Per-query decode dump for inspection and determinism checks.
    {
        std::ofstream out(paths.decode_out, std::ios::trunc);
        size_t max_k = *std::max_element(config.eval_k.begin(), config.eval_k.end());
        for (const auto& q : queries)
            out << decode_query_json(config, stack.model, stack.fm, stack.catalog, q.query,
                                     dc.beam, max_k)
                << "\n";
    }

    EvalReport report = run_eval(stack.model, stack.fm, queries, dc, config.eval_k);
    report.config_echo = config.echo_json;
    write_file_bytes(paths.eval_csv, report.to_csv());
    write_file_bytes(paths.eval_json, report.to_json() + "\n");
    write_meta(paths.eval_csv, config, "eval");

    auto dist = query_distribution(clicks);
    write_file_bytes(paths.query_dist_csv, dist.to_csv());

    if (!beam_sweep.empty()) {
        std::string csv = "beam,K,recall\n";
        for (uint32_t b : beam_sweep) {
            DecodeConfig swept = dc;
            swept.beam = b;
            EvalReport r = run_eval(stack.model, stack.fm, queries, swept, config.eval_k);
            for (size_t k : config.eval_k) {
                char line[64];
                snprintf(line, sizeof(line), "%u,%zu,%.17g\n", b, k, r.recall("all", k));
                csv += line;
            }
        }
        write_file_bytes(paths.beam_sweep_csv, csv);
    }

    nlohmann::json j{{"artifact", paths.eval_csv},
                     {"queries", queries.size()},
                     {"beam", dc.beam}};
    for (size_t k : config.eval_k)
        j["recall_at_" + std::to_string(k)] = report.recall("all", k);
    return {summary_line("eval", std::move(j), config)};
}

void serve_loop(const PipelineConfig& config, WhichModel which, std::istream& in,
                std::ostream& out) {
    auto stack = load_stack(config, which);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto started = std::chrono::steady_clock::now();
        nlohmann::json response;
        try {
            nlohmann::json request = nlohmann::json::parse(line);
            if (!request.is_object() || !request.contains("query") || !request["query"].is_string())
                throw DataError("request must be {\"query\": str, \"k\": int?, \"beam\": int?}");
            std::string query = request["query"].get<std::string>();
            size_t k = request.value("k", 10);
            std::optional<uint32_t> beam;
            if (request.contains("beam")) beam = request["beam"].get<uint32_t>();

            auto decoded = nlohmann::json::parse(decode_query_json(
                config, stack.model, stack.fm, stack.catalog, query, beam, k));
            nlohmann::json items = nlohmann::json::array();
            for (const auto& item : decoded["items"]) {
                nlohmann::json ij;
                ij["item_id"] = item["item_id"];
                ij["score"] = item["score"];
                nlohmann::json spans = nlohmann::json::array();
                for (const auto& idx : item["support"])
                    spans.push_back(decoded["spans"][idx.get<size_t>()]["tokens"]);
                ij["spans"] = std::move(spans);
                items.push_back(std::move(ij));
            }
            response["items"] = std::move(items);
            double ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - started)
                            .count();
            response["latency_ms"] = ms;
        } catch (const nlohmann::json::exception& e) {
            response = nlohmann::json{{"error", std::string("bad request: ") + e.what()}};
        } catch (const std::exception& e) {
            response = nlohmann::json{{"error", e.what()}};
        }
        out << response.dump() << "\n" << std::flush;
    }
}

}  // namespace genr
