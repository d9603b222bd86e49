#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "genr/common.hpp"
#include "genr/corpus.hpp"

namespace genr {

// Token-level FM-index over the concatenation of all span texts:
//   span_1 SEP span_2 SEP ... span_z TERM
// TERM (0) and SEP (1) sit below every real token id, so no pattern of real
// tokens can match across a span boundary. After build() the index is
// read-only and safe to share across threads.
class FmIndex {
  public:
    static constexpr Token kTerm = 0;
    static constexpr Token kSep = 1;
    static constexpr Token kRealTokenStart = 2;

    struct DocRun {
        uint64_t begin = 0;  // [begin, end) in text coordinates
        uint64_t end = 0;
        ItemId item_id = 0;
        uint32_t span_index = 0;
    };

    struct Extensions {
        std::map<Token, uint64_t> counts;  // token -> count(prefix . token), real tokens only
        bool end_ok = false;               // prefix occurs immediately before SEP/TERM
    };

    FmIndex() = default;

    static FmIndex build(const Catalog& catalog, uint32_t sample_rate = 8);
    // Convenience for tests: explicit (item, spans) lists.
    static FmIndex build_from_spans(
        const std::vector<std::pair<ItemId, std::vector<std::vector<Token>>>>& docs,
        uint64_t vocab_size, uint32_t sample_rate = 8);

    // Number of occurrences of the pattern as a contiguous subsequence of a
    // single span segment. Empty pattern counts every real-token position;
    // unknown or sentinel tokens give zero.
    uint64_t count(std::span<const Token> pattern) const;

    Extensions allowed_extensions(std::span<const Token> prefix) const;

    // log((count + 1) / (N + V)); -inf when the span does not occur.
    double fm_score(std::span<const Token> span) const;

    // Sorted distinct item ids whose canonical title contains the span.
    std::vector<ItemId> locate_items(std::span<const Token> span) const;

    void save(const std::string& path) const;
    static FmIndex load(const std::string& path);

    uint64_t vocab_size() const { return V_; }
    uint64_t total_real_tokens() const { return N_; }
    uint64_t text_size() const { return text_.size(); }
    uint32_t sample_rate() const { return sample_rate_; }
    uint32_t max_span_len() const;
    const std::vector<Token>& text() const { return text_; }
    const std::vector<Token>& bwt() const { return bwt_; }
    const std::vector<uint64_t>& cumulative_counts() const { return C_; }

    // occ(c, i): occurrences of c in bwt[0..i).
    uint64_t occ(Token c, uint64_t i) const;

  private:
    struct Interval {
        uint64_t lo = 0, hi = 0;
        bool empty() const { return lo >= hi; }
        uint64_t width() const { return hi - lo; }
    };

    void finish_build(std::vector<Token> text, std::vector<DocRun> runs, uint64_t vocab_size,
                      uint32_t sample_rate);
    void build_rank_structures(const std::vector<uint32_t>& sa);
    Interval backward_search(std::span<const Token> pattern) const;
    uint64_t lf(uint64_t row) const;
    uint64_t locate_row(uint64_t row) const;
    Token token_after(uint64_t row, uint64_t depth) const;
    const DocRun* run_at(uint64_t pos) const;

    uint64_t V_ = 0;  // alphabet size including sentinels
    uint64_t N_ = 0;  // real-token positions in text
    uint32_t sample_rate_ = 8;
    uint32_t block_ = 64;
    std::vector<Token> text_;
    std::vector<Token> bwt_;
    std::vector<uint64_t> C_;              // size V_+1
    std::vector<uint32_t> rank_blocks_;    // (n/block_+1) x V_ checkpoint counts
    std::vector<std::pair<uint64_t, uint64_t>> sa_samples_;  // (row, text pos), sorted by row
    std::vector<DocRun> doc_runs_;         // sorted by begin
};

}  // namespace genr
