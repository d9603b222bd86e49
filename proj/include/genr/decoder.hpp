#pragma once

#include <span>
#include <vector>

#include "genr/fm_index.hpp"
#include "genr/model.hpp"

namespace genr {

enum class SpanAggregation { log_sum_exp, max, sum };

struct DecodeConfig {
    uint32_t beam = 100;
    uint32_t max_span_len = 0;  // 0: use the longest indexed span
    uint32_t top_k = 0;         // 0: disabled
    double top_p = 1.0;         // >= 1: disabled
    double fm_weight = 1.0;     // lambda blending the FM score into s
    SpanAggregation aggregation = SpanAggregation::log_sum_exp;

    void validate() const;
};

struct BeamHypothesis {
    std::vector<Token> tokens;
    double lm_logprob = 0.0;
    bool complete = false;  // EOS emitted at a position where the span ends in the index
};

// Beam search over next_token_logprobs with the candidate set at every step
// restricted to extensions that occur in the index; EOS is a candidate only
// where the hypothesis ends a span somewhere in the corpus. Out-of-index
// tokens can never enter the beam, so every emitted span has count > 0.
// Returns up to `beam` completed spans ordered by log-probability, ties
// broken by lexicographic token order.
std::vector<BeamHypothesis> constrained_beam_search(const ModelParams& model, const FmIndex& fm,
                                                    std::span<const Token> query,
                                                    const DecodeConfig& config);

struct ScoredSpan {
    std::vector<Token> tokens;
    double lm = 0.0;
    double fm = 0.0;
    double score = 0.0;  // lm + lambda * fm
};

std::vector<ScoredSpan> score_spans(std::span<const BeamHypothesis> spans, const FmIndex& fm,
                                    double fm_weight);

struct ItemResult {
    ItemId item_id = 0;
    double score = 0.0;
    std::vector<size_t> support;  // indices into RetrievalResult::spans
};

struct RetrievalResult {
    std::vector<ScoredSpan> spans;
    std::vector<ItemResult> items;  // descending score, ties by ascending item_id
};

// Maps scored spans to the items containing them; an item's score aggregates
// its supporting spans (log-sum-exp by default, max or sum for ablation).
// Truncated to the top K items.
RetrievalResult retrieve(std::vector<ScoredSpan> spans, const FmIndex& fm, size_t k,
                         SpanAggregation aggregation = SpanAggregation::log_sum_exp);

}  // namespace genr
