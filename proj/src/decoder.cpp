#include "genr/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace genr {
namespace {

bool lex_less(const std::vector<Token>& a, const std::vector<Token>& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

// lm descending, then lexicographic token order.
bool hyp_before(const BeamHypothesis& a, const BeamHypothesis& b) {
    if (a.lm_logprob != b.lm_logprob) return a.lm_logprob > b.lm_logprob;
    return lex_less(a.tokens, b.tokens);
}

struct Candidate {
    Token token;
    double logprob;
};

}  // namespace

void DecodeConfig::validate() const {
    if (beam == 0) throw UsageError("beam size must be at least 1");
    if (top_p <= 0.0) throw UsageError("top_p must be in (0, 1]");
}

std::vector<BeamHypothesis> constrained_beam_search(const ModelParams& model, const FmIndex& fm,
                                                    std::span<const Token> query,
                                                    const DecodeConfig& config) {
    config.validate();
    const uint32_t max_len = config.max_span_len > 0 ? config.max_span_len : fm.max_span_len();
    auto query_vec = encode_query(model, query);

    std::vector<BeamHypothesis> beam{BeamHypothesis{}};
    std::vector<BeamHypothesis> completed;
    std::vector<Candidate> candidates;

    for (uint32_t step = 0; step <= max_len && !beam.empty(); ++step) {
        std::vector<BeamHypothesis> expansions;
        for (const auto& hyp : beam) {
            auto ext = fm.allowed_extensions(hyp.tokens);
            auto logprobs = next_token_logprobs(model, query_vec, hyp.tokens);

            candidates.clear();
            if (hyp.tokens.size() < max_len)
                for (const auto& [tok, cnt] : ext.counts)
                    candidates.push_back({tok, logprobs[tok]});
            if (ext.end_ok && !hyp.tokens.empty())
                candidates.push_back({Vocabulary::kEos, logprobs[Vocabulary::kEos]});
            if (candidates.empty()) continue;

            std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
                if (a.logprob != b.logprob) return a.logprob > b.logprob;
                return a.token < b.token;
            });
            size_t keep = candidates.size();
            if (config.top_k > 0) keep = std::min<size_t>(keep, config.top_k);
            if (config.top_p < 1.0) {
                double cum = 0.0;
                size_t kp = 0;
                while (kp < keep) {
                    cum += std::exp(candidates[kp].logprob);
                    ++kp;
                    if (cum >= config.top_p) break;
                }
                keep = kp;
            }

            for (size_t i = 0; i < keep; ++i) {
                const auto& c = candidates[i];
                BeamHypothesis next;
                next.tokens = hyp.tokens;
                next.lm_logprob = hyp.lm_logprob + c.logprob;
                if (c.token == Vocabulary::kEos) {
                    next.complete = true;
                    completed.push_back(std::move(next));
                } else {
                    next.tokens.push_back(c.token);
                    expansions.push_back(std::move(next));
                }
            }
        }
        std::sort(expansions.begin(), expansions.end(), hyp_before);
        if (expansions.size() > config.beam) expansions.resize(config.beam);
        beam = std::move(expansions);
    }

    std::sort(completed.begin(), completed.end(), hyp_before);
    if (completed.size() > config.beam) completed.resize(config.beam);
    return completed;
}

std::vector<ScoredSpan> score_spans(std::span<const BeamHypothesis> spans, const FmIndex& fm,
                                    double fm_weight) {
    std::vector<ScoredSpan> out;
    out.reserve(spans.size());
    for (const auto& hyp : spans) {
        if (fm.count(hyp.tokens) == 0)
            throw InternalError("decoder emitted a span absent from the index");
        ScoredSpan s;
        s.tokens = hyp.tokens;
        s.lm = hyp.lm_logprob;
        s.fm = fm.fm_score(hyp.tokens);
        s.score = s.lm + fm_weight * s.fm;
        out.push_back(std::move(s));
    }
    return out;
}

RetrievalResult retrieve(std::vector<ScoredSpan> spans, const FmIndex& fm, size_t k,
                         SpanAggregation aggregation) {
    RetrievalResult result;
    result.spans = std::move(spans);
    std::map<ItemId, std::vector<size_t>> support;
    for (size_t i = 0; i < result.spans.size(); ++i)
        for (ItemId item : fm.locate_items(result.spans[i].tokens)) support[item].push_back(i);

    result.items.reserve(support.size());
    for (auto& [item, span_idx] : support) {
        double mx = kNegInf;
        for (size_t i : span_idx) mx = std::max(mx, result.spans[i].score);
        ItemResult ir;
        ir.item_id = item;
        switch (aggregation) {
            case SpanAggregation::max:
                ir.score = mx;
                break;
            case SpanAggregation::sum: {
                double total = 0.0;
                for (size_t i : span_idx) total += result.spans[i].score;
                ir.score = total;
                break;
            }
            case SpanAggregation::log_sum_exp: {
                double sum = 0.0;
                for (size_t i : span_idx) sum += std::exp(result.spans[i].score - mx);
                ir.score = mx + std::log(sum);
                break;
            }
        }
        ir.support = std::move(span_idx);
        result.items.push_back(std::move(ir));
    }
    std::sort(result.items.begin(), result.items.end(), [](const ItemResult& a, const ItemResult& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.item_id < b.item_id;
    });
    if (result.items.size() > k) result.items.resize(k);
    return result;
}

}  // namespace genr
