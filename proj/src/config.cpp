#include "genr/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>
#include <sstream>

#include <json.hpp>

namespace genr {
namespace {

// Flattens JSON into dotted keys so both config formats share one loader.
void flatten(const nlohmann::json& j, const std::string& prefix,
             std::map<std::string, std::string>& out) {
    if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it)
            flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
    } else if (j.is_array()) {
        std::string joined;
        for (const auto& v : j) {
            if (!joined.empty()) joined += ",";
            joined += v.dump();
        }
        out[prefix] = joined;
    } else if (j.is_string()) {
        out[prefix] = j.get<std::string>();
    } else {
        out[prefix] = j.dump();
    }
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::map<std::string, std::string> parse_kv(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw UsageError("config line " + std::to_string(lineno) + ": expected key=value");
        out[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }
    return out;
}

template <typename T>
T parse_num(const std::string& key, const std::string& value) {
    std::istringstream in(value);
    T v{};
    in >> v;
    if (in.fail()) throw UsageError("config key " + key + ": cannot parse '" + value + "'");
    return v;
}

std::vector<size_t> parse_size_list(const std::string& key, const std::string& value) {
    std::vector<size_t> out;
    std::istringstream in(value);
    std::string part;
    while (std::getline(in, part, ',')) {
        part = trim(part);
        if (!part.empty()) out.push_back(parse_num<size_t>(key, part));
    }
    if (out.empty()) throw UsageError("config key " + key + ": empty list");
    return out;
}

}  // namespace

PipelineConfig PipelineConfig::defaults() {
    PipelineConfig c;
    c.sft.seed = c.seed;
    c.dpo.seed = c.seed;
    c.synthetic.seed = c.seed;
    return c;
}

PipelineConfig PipelineConfig::from_file(const std::string& path) {
    std::string bytes;
    try {
        bytes = read_file_bytes(path);
    } catch (const DataError& e) {
        throw UsageError(std::string(e.what()));
    }

    std::map<std::string, std::string> kv;
    nlohmann::json parsed = nlohmann::json::value_t::discarded;
    std::string probe = trim(bytes);
    if (!probe.empty() && (probe[0] == '{' || probe[0] == '[')) {
        try {
            parsed = nlohmann::json::parse(bytes);
        } catch (const nlohmann::json::exception& e) {
            throw UsageError("config file " + path + ": " + e.what());
        }
        flatten(parsed, "", kv);
    } else {
        kv = parse_kv(bytes);
    }

    PipelineConfig c = defaults();
    c.config_hash = fnv1a64(bytes.data(), bytes.size());

    for (const auto& [key, value] : kv) {
        if (key == "paths.catalog") c.catalog_path = value;
        else if (key == "paths.clicks") c.clicks_path = value;
        else if (key == "paths.lexicon") c.lexicon_path = value;
        else if (key == "paths.artifacts") c.artifacts_dir = value;
        else if (key == "corpus.l") c.span_len = parse_num<uint32_t>(key, value);
        else if (key == "corpus.task") {
            if (value == "multi_span") c.task = TaskMode::multi_span;
            else if (value == "title") c.task = TaskMode::title;
            else throw UsageError("config key corpus.task: expected multi_span or title");
        }
        else if (key == "model.d") c.dims.embed = parse_num<uint32_t>(key, value);
        else if (key == "model.k") c.dims.context = parse_num<uint32_t>(key, value);
        else if (key == "model.h") c.dims.hidden = parse_num<uint32_t>(key, value);
        else if (key == "sft.lr") c.sft.sft_lr = parse_num<double>(key, value);
        else if (key == "sft.batch") c.sft.batch_size = parse_num<uint32_t>(key, value);
        else if (key == "sft.epochs") c.sft.epochs = parse_num<uint32_t>(key, value);
        else if (key == "dpo.lr") c.dpo.dpo_lr = parse_num<double>(key, value);
        else if (key == "dpo.beta") c.dpo.beta = parse_num<double>(key, value);
        else if (key == "dpo.batch") c.dpo.batch_size = parse_num<uint32_t>(key, value);
        else if (key == "dpo.epochs") c.dpo.epochs = parse_num<uint32_t>(key, value);
        else if (key == "dpo.ratio") c.pref_ratio = parse_num<uint32_t>(key, value);
        else if (key == "dpo.holdout") c.pref_holdout = parse_num<double>(key, value);
        else if (key == "decode.beam") c.decode.beam = parse_num<uint32_t>(key, value);
        else if (key == "decode.max_span_len") c.decode.max_span_len = parse_num<uint32_t>(key, value);
        else if (key == "decode.top_k") c.decode.top_k = parse_num<uint32_t>(key, value);
        else if (key == "decode.top_p") c.decode.top_p = parse_num<double>(key, value);
        else if (key == "decode.lambda") c.decode.fm_weight = parse_num<double>(key, value);
        else if (key == "decode.agg") {
            if (value == "lse") c.decode.aggregation = SpanAggregation::log_sum_exp;
            else if (value == "max") c.decode.aggregation = SpanAggregation::max;
            else if (value == "sum") c.decode.aggregation = SpanAggregation::sum;
            else throw UsageError("config key decode.agg: expected lse, max or sum");
        }
        else if (key == "eval.k") c.eval_k = parse_size_list(key, value);
        else if (key == "eval.holdout") c.eval_holdout = parse_num<double>(key, value);
        else if (key == "seed") c.seed = parse_num<uint64_t>(key, value);
        else if (key == "synthetic.items") c.synthetic.n_items = parse_num<size_t>(key, value);
        else if (key == "synthetic.queries") c.synthetic.n_queries = parse_num<size_t>(key, value);
        else if (key == "synthetic.clicks") c.synthetic.n_clicks = parse_num<size_t>(key, value);
        else if (key == "synthetic.zipf") c.synthetic.zipf_exponent = parse_num<double>(key, value);
        else throw UsageError("unknown config key: " + key);
    }

    c.sft.seed = c.seed;
    c.dpo.seed = c.seed + 1;
    c.synthetic.seed = c.seed;
    if (c.span_len < 2) throw UsageError("corpus.l must be at least 2");

    if (const char* env = std::getenv("GENR_ARTIFACTS"); env != nullptr && *env != '\0')
        c.artifacts_dir = env;

    nlohmann::json echo;
    echo["paths"] = {{"catalog", c.catalog_path},
                     {"clicks", c.clicks_path},
                     {"lexicon", c.lexicon_path}};
    echo["corpus"] = {{"l", c.span_len},
                      {"task", c.task == TaskMode::title ? "title" : "multi_span"}};
    echo["model"] = {{"d", c.dims.embed}, {"k", c.dims.context}, {"h", c.dims.hidden}};
    echo["sft"] = {{"lr", c.sft.sft_lr}, {"batch", c.sft.batch_size}, {"epochs", c.sft.epochs}};
    echo["dpo"] = {{"lr", c.dpo.dpo_lr},
                   {"beta", c.dpo.beta},
                   {"batch", c.dpo.batch_size},
                   {"epochs", c.dpo.epochs},
                   {"ratio", c.pref_ratio},
                   {"holdout", c.pref_holdout}};
    const char* agg = c.decode.aggregation == SpanAggregation::max
                          ? "max"
                          : c.decode.aggregation == SpanAggregation::sum ? "sum" : "lse";
    echo["decode"] = {{"beam", c.decode.beam},
                      {"max_span_len", c.decode.max_span_len},
                      {"top_k", c.decode.top_k},
                      {"top_p", c.decode.top_p},
                      {"lambda", c.decode.fm_weight},
                      {"agg", agg}};
    echo["eval"] = {{"k", c.eval_k}, {"holdout", c.eval_holdout}};
    echo["seed"] = c.seed;
    c.echo_json = echo.dump();
    return c;
}

std::string PipelineConfig::hash_hex() const {
    char buf[17];
    snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(config_hash));
    return std::string(buf);
}

}  // namespace genr
