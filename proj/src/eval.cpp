#include "genr/eval.hpp"

#include <algorithm>
#include <sstream>

#include <json.hpp>

namespace genr {

Bucket bucketize(int64_t n_items) {
    if (n_items < 1) throw DataError("bucketize requires at least one relevant item");
    if (n_items == 1) return Bucket::single;
    if (n_items <= 5) return Bucket::up_to_5;
    if (n_items <= 20) return Bucket::up_to_20;
    if (n_items <= 40) return Bucket::up_to_40;
    return Bucket::over_40;
}

std::string bucket_name(Bucket b) { return std::to_string(static_cast<int>(b)); }

double recall_at_k(const std::set<ItemId>& relevant, std::span<const ItemId> ranked, size_t k) {
    if (relevant.empty()) throw DataError("recall needs a non-empty relevant set");
    size_t hits = 0;
    size_t limit = std::min(k, ranked.size());
    for (size_t i = 0; i < limit; ++i)
        if (relevant.count(ranked[i])) ++hits;
    return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

std::pair<std::vector<ClickEvent>, std::vector<ClickEvent>> temporal_split(
    std::span<const ClickEvent> clicks, double holdout_frac) {
    if (holdout_frac < 0.0 || holdout_frac >= 1.0)
        throw UsageError("holdout fraction must be in [0, 1)");
    std::vector<ClickEvent> ordered(clicks.begin(), clicks.end());
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const ClickEvent& a, const ClickEvent& b) { return a.timestamp < b.timestamp; });
    size_t cut = ordered.size() - static_cast<size_t>(static_cast<double>(ordered.size()) * holdout_frac);
    std::vector<ClickEvent> train(ordered.begin(), ordered.begin() + static_cast<long>(cut));
    std::vector<ClickEvent> heldout(ordered.begin() + static_cast<long>(cut), ordered.end());
    return {std::move(train), std::move(heldout)};
}

std::vector<EvalQuery> make_eval_queries(std::span<const ClickEvent> heldout,
                                         const Vocabulary& vocab) {
    std::map<std::string, std::set<ItemId>> relevant;
    for (const auto& ev : heldout)
        if (ev.label == ClickLabel::clicked) relevant[ev.query].insert(ev.item_id);
    std::vector<EvalQuery> queries;
    queries.reserve(relevant.size());
    for (auto& [query, items] : relevant) {
        EvalQuery q;
        q.query = query;
        q.query_tokens = vocab.encode_query(tokenize(query));
        if (q.query_tokens.empty()) continue;
        q.relevant = std::move(items);
        q.bucket = bucketize(static_cast<int64_t>(q.relevant.size()));
        queries.push_back(std::move(q));
    }
    return queries;
}

double EvalReport::recall(const std::string& bucket, size_t k) const {
    for (const auto& row : rows)
        if (row.bucket == bucket && row.k == k) return row.recall;
    throw DataError("no eval row for bucket " + bucket + " at K=" + std::to_string(k));
}

std::string EvalReport::to_csv() const {
    std::ostringstream out;
    out << "bucket,K,recall,n_queries\n";
    out.precision(17);
    for (const auto& row : rows)
        out << row.bucket << "," << row.k << "," << row.recall << "," << row.n_queries << "\n";
    return out.str();
}

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["beam"] = beam;
    if (!config_echo.empty()) j["config"] = nlohmann::json::parse(config_echo);
    nlohmann::json rows_json = nlohmann::json::array();
    for (const auto& row : rows) {
        nlohmann::json r;
        r["bucket"] = row.bucket;
        r["k"] = row.k;
        r["recall"] = row.recall;
        r["n_queries"] = row.n_queries;
        rows_json.push_back(std::move(r));
    }
    j["rows"] = std::move(rows_json);
    nlohmann::json pq = nlohmann::json::object();
    for (const auto& [query, recall] : per_query) pq[query] = recall;
    j["per_query"] = std::move(pq);
    return j.dump(2);
}

EvalReport run_eval(const ModelParams& model, const FmIndex& fm,
                    std::span<const EvalQuery> queries, const DecodeConfig& decode,
                    std::span<const size_t> k_values) {
    if (queries.empty()) throw DataError("empty evaluation query set");
    if (k_values.empty()) throw UsageError("at least one K value required");
    size_t max_k = *std::max_element(k_values.begin(), k_values.end());

    EvalReport report;
    report.beam = decode.beam;
    // recall sums per (bucket, k); bucket 0 aggregates all queries
    std::map<int, std::vector<double>> sums;
    std::map<int, size_t> counts;
    for (int b = 0; b <= 5; ++b) sums[b].assign(k_values.size(), 0.0);

    for (const auto& q : queries) {
        auto spans = constrained_beam_search(model, fm, q.query_tokens, decode);
        auto scored = score_spans(spans, fm, decode.fm_weight);
        auto result = retrieve(std::move(scored), fm, max_k, decode.aggregation);
        std::vector<ItemId> ranked;
        ranked.reserve(result.items.size());
        for (const auto& item : result.items) ranked.push_back(item.item_id);

        int bucket = static_cast<int>(q.bucket);
        ++counts[0];
        ++counts[bucket];
        for (size_t ki = 0; ki < k_values.size(); ++ki) {
            double r = recall_at_k(q.relevant, ranked, k_values[ki]);
            sums[0][ki] += r;
            sums[bucket][ki] += r;
            if (k_values[ki] == max_k) report.per_query[q.query] = r;
        }
    }

    for (size_t ki = 0; ki < k_values.size(); ++ki) {
        for (int b = 1; b <= 5; ++b) {
            if (counts[b] == 0) continue;
            report.rows.push_back({bucket_name(static_cast<Bucket>(b)), k_values[ki],
                                   sums[b][ki] / static_cast<double>(counts[b]), counts[b]});
        }
        report.rows.push_back({"all", k_values[ki], sums[0][ki] / static_cast<double>(counts[0]),
                               counts[0]});
    }
    return report;
}

QueryDistribution query_distribution(std::span<const ClickEvent> clicks) {
    std::map<std::string, size_t> click_counts;
    for (const auto& ev : clicks)
        if (ev.label == ClickLabel::clicked) ++click_counts[ev.query];

    struct Class {
        const char* label;
        size_t lo, hi;  // inclusive
    };
    static constexpr Class classes[] = {
        {"1", 1, 1},   {"2", 2, 2},     {"3", 3, 3},          {"4", 4, 4},
        {"5-9", 5, 9}, {"10-99", 10, 99}, {"100+", 100, SIZE_MAX},
    };

    QueryDistribution dist;
    if (click_counts.empty()) return dist;
    const double total = static_cast<double>(click_counts.size());
    size_t below5 = 0;
    for (const auto& cls : classes) {
        size_t n = 0;
        for (const auto& [query, c] : click_counts)
            if (c >= cls.lo && c <= cls.hi) ++n;
        if (cls.hi < 5) below5 += n;
        dist.rows.push_back({cls.label, n, static_cast<double>(n) / total});
    }
    dist.share_below_5 = static_cast<double>(below5) / total;
    return dist;
}

std::string QueryDistribution::to_csv() const {
    std::ostringstream out;
    out << "clicks,n_queries,share\n";
    out.precision(17);
    for (const auto& row : rows) out << row.label << "," << row.n_queries << "," << row.share << "\n";
    return out.str();
}

}  // namespace genr
