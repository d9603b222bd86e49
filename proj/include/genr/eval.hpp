#pragma once

#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "genr/decoder.hpp"

namespace genr {

// Five query classes by number of relevant items; the fewer, the more
// long-tailed the query.
enum class Bucket : int {
    single = 1,       // #item = 1
    up_to_5 = 2,      // 1 < #item <= 5
    up_to_20 = 3,     // 5 < #item <= 20
    up_to_40 = 4,     // 20 < #item <= 40
    over_40 = 5,      // #item > 40
};

Bucket bucketize(int64_t n_items);
std::string bucket_name(Bucket b);

// Fraction of relevant items found in the top K of the ranking.
double recall_at_k(const std::set<ItemId>& relevant, std::span<const ItemId> ranked, size_t k);

struct EvalQuery {
    std::string query;
    std::vector<Token> query_tokens;
    std::set<ItemId> relevant;  // held-out clicked items
    Bucket bucket = Bucket::single;
};

// Stable temporal split: events ordered by timestamp, last holdout_frac go
// to evaluation.
std::pair<std::vector<ClickEvent>, std::vector<ClickEvent>> temporal_split(
    std::span<const ClickEvent> clicks, double holdout_frac);

// Ground-truth queries from held-out clicked events, ordered by query text.
std::vector<EvalQuery> make_eval_queries(std::span<const ClickEvent> heldout,
                                         const Vocabulary& vocab);

struct EvalReport {
    struct Row {
        std::string bucket;  // "1".."5" or "all"
        size_t k = 0;
        double recall = 0.0;
        size_t n_queries = 0;
    };
    std::vector<Row> rows;
    uint32_t beam = 0;
    std::string config_echo;  // canonical JSON of the config used
    // per-query recall at the largest K, keyed by query text
    std::map<std::string, double> per_query;

    double recall(const std::string& bucket, size_t k) const;
    std::string to_csv() const;
    std::string to_json() const;
};

// Decodes and retrieves every query, then reports macro-averaged Recall@K
// per bucket and overall for each K.
EvalReport run_eval(const ModelParams& model, const FmIndex& fm,
                    std::span<const EvalQuery> queries, const DecodeConfig& decode,
                    std::span<const size_t> k_values);

// Histogram of queries by how many clicked events they have; class edges
// chosen so the share of queries with fewer than 5 clicks is visible.
struct QueryDistribution {
    struct Row {
        std::string label;
        size_t n_queries = 0;
        double share = 0.0;
    };
    std::vector<Row> rows;
    double share_below_5 = 0.0;

    std::string to_csv() const;
};

QueryDistribution query_distribution(std::span<const ClickEvent> clicks);

}  // namespace genr
