#include "genr/fm_index.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

namespace genr {
namespace {

constexpr char kMagic[4] = {'G', 'F', 'M', 'I'};
constexpr uint32_t kVersion = 1;

// Prefix-doubling suffix array construction, O(n log n) via counting sorts.
std::vector<uint32_t> build_suffix_array(const std::vector<Token>& text, uint64_t alphabet) {
    const size_t n = text.size();
    std::vector<uint32_t> sa(n), rank(n), tmp(n), cnt;
    for (size_t i = 0; i < n; ++i) rank[i] = text[i];

    auto counting_sort = [&](const std::vector<uint32_t>& keys, uint32_t key_range,
                             const std::vector<uint32_t>& order, std::vector<uint32_t>& out) {
        cnt.assign(key_range + 1, 0);
        for (size_t i = 0; i < n; ++i) ++cnt[keys[order[i]]];
        uint32_t sum = 0;
        for (auto& c : cnt) {
            uint32_t t = c;
            c = sum;
            sum += t;
        }
        for (size_t i = 0; i < n; ++i) out[cnt[keys[order[i]]]++] = order[i];
    };

    std::iota(sa.begin(), sa.end(), 0);
    counting_sort(rank, static_cast<uint32_t>(alphabet), sa, tmp);
    sa.swap(tmp);

    std::vector<uint32_t> second(n), order(n);
    for (size_t gap = 1;; gap *= 2) {
        // second key: rank[i+gap] shifted by 1 so "past the end" sorts first
        for (size_t i = 0; i < n; ++i)
            second[i] = (i + gap < n) ? rank[i + gap] + 1 : 0;
        uint32_t max_rank = *std::max_element(rank.begin(), rank.end());
        counting_sort(second, max_rank + 1, sa, order);
        counting_sort(rank, max_rank, order, sa);

        tmp[sa[0]] = 0;
        for (size_t i = 1; i < n; ++i) {
            bool same = rank[sa[i]] == rank[sa[i - 1]] && second[sa[i]] == second[sa[i - 1]];
            tmp[sa[i]] = tmp[sa[i - 1]] + (same ? 0 : 1);
        }
        rank.swap(tmp);
        if (rank[sa[n - 1]] == n - 1) break;
    }
    return sa;
}

}  // namespace

FmIndex FmIndex::build(const Catalog& catalog, uint32_t sample_rate) {
    std::vector<std::pair<ItemId, std::vector<std::vector<Token>>>> docs;
    docs.reserve(catalog.items.size());
    for (const auto& item : catalog.items) {
        std::vector<std::vector<Token>> spans;
        spans.reserve(item.spans.size());
        for (const auto& s : item.spans) spans.push_back(s.tokens);
        docs.emplace_back(item.item_id, std::move(spans));
    }
    return build_from_spans(docs, catalog.vocab.size(), sample_rate);
}

FmIndex FmIndex::build_from_spans(
    const std::vector<std::pair<ItemId, std::vector<std::vector<Token>>>>& docs,
    uint64_t vocab_size, uint32_t sample_rate) {
    std::vector<Token> text;
    std::vector<DocRun> runs;
    for (const auto& [item_id, spans] : docs) {
        uint32_t span_index = 1;
        for (const auto& span : spans) {
            if (span.empty()) throw DataError("cannot index an empty span");
            if (!text.empty()) text.push_back(kSep);
            DocRun run;
            run.begin = text.size();
            for (Token t : span) {
                if (t < kRealTokenStart || t >= vocab_size)
                    throw DataError("span token id out of vocabulary range");
                text.push_back(t);
            }
            run.end = text.size();
            run.item_id = item_id;
            run.span_index = span_index++;
            runs.push_back(run);
        }
    }
    if (text.empty()) throw DataError("cannot build an FM-index over an empty corpus");
    text.push_back(kTerm);

    FmIndex fm;
    fm.finish_build(std::move(text), std::move(runs), vocab_size, sample_rate);
    return fm;
}

void FmIndex::finish_build(std::vector<Token> text, std::vector<DocRun> runs, uint64_t vocab_size,
                           uint32_t sample_rate) {
    if (sample_rate == 0) throw InternalError("sample rate must be positive");
    V_ = vocab_size;
    sample_rate_ = sample_rate;
    text_ = std::move(text);
    doc_runs_ = std::move(runs);
    N_ = 0;
    for (const auto& r : doc_runs_) N_ += r.end - r.begin;

    auto sa = build_suffix_array(text_, V_);
    const size_t n = text_.size();
    bwt_.resize(n);
    for (size_t i = 0; i < n; ++i) bwt_[i] = sa[i] == 0 ? text_[n - 1] : text_[sa[i] - 1];
    build_rank_structures(sa);
}

void FmIndex::build_rank_structures(const std::vector<uint32_t>& sa) {
    const size_t n = bwt_.size();
    C_.assign(V_ + 1, 0);
    for (Token t : text_) ++C_[t + 1];
    for (size_t c = 1; c <= V_; ++c) C_[c] += C_[c - 1];

    const size_t nblocks = n / block_ + 1;
    rank_blocks_.assign(nblocks * V_, 0);
    std::vector<uint32_t> running(V_, 0);
    for (size_t i = 0; i < n; ++i) {
        if (i % block_ == 0)
            std::copy(running.begin(), running.end(), rank_blocks_.begin() + (i / block_) * V_);
        ++running[bwt_[i]];
    }
    if (n % block_ == 0)
        std::copy(running.begin(), running.end(), rank_blocks_.begin() + (n / block_) * V_);

    sa_samples_.clear();
    for (size_t row = 0; row < n; ++row)
        if (sa[row] % sample_rate_ == 0) sa_samples_.emplace_back(row, sa[row]);
    // rows ascend already; kept sorted for binary search
}

uint64_t FmIndex::occ(Token c, uint64_t i) const {
    if (c >= V_) return 0;
    uint64_t block = i / block_;
    uint64_t count = rank_blocks_[block * V_ + c];
    for (uint64_t j = block * block_; j < i; ++j)
        if (bwt_[j] == c) ++count;
    return count;
}

uint64_t FmIndex::lf(uint64_t row) const { return C_[bwt_[row]] + occ(bwt_[row], row); }

uint64_t FmIndex::locate_row(uint64_t row) const {
    uint64_t steps = 0;
    uint64_t r = row;
    while (true) {
        auto it = std::lower_bound(sa_samples_.begin(), sa_samples_.end(),
                                   std::make_pair(r, uint64_t{0}),
                                   [](const auto& a, const auto& b) { return a.first < b.first; });
        if (it != sa_samples_.end() && it->first == r) return it->second + steps;
        r = lf(r);
        ++steps;
        if (steps > text_.size()) throw InternalError("locate walked past text size");
    }
}

FmIndex::Interval FmIndex::backward_search(std::span<const Token> pattern) const {
    Interval iv{0, text_.size()};
    for (size_t j = pattern.size(); j-- > 0;) {
        Token c = pattern[j];
        if (c < kRealTokenStart || c >= V_) return {0, 0};
        iv.lo = C_[c] + occ(c, iv.lo);
        iv.hi = C_[c] + occ(c, iv.hi);
        if (iv.empty()) return {0, 0};
    }
    return iv;
}

uint64_t FmIndex::count(std::span<const Token> pattern) const {
    if (pattern.empty()) return N_;
    return backward_search(pattern).width();
}

Token FmIndex::token_after(uint64_t row, uint64_t depth) const {
    uint64_t pos = locate_row(row) + depth;
    if (pos >= text_.size()) throw InternalError("prefix occurrence runs past the terminator");
    return text_[pos];
}

FmIndex::Extensions FmIndex::allowed_extensions(std::span<const Token> prefix) const {
    Extensions ext;
    if (prefix.empty()) {
        // Every suffix row starts with its first text token; counts come
        // straight from the C array.
        for (Token c = kRealTokenStart; c < V_; ++c) {
            uint64_t cnt = C_[c + 1] - C_[c];
            if (cnt > 0) ext.counts.emplace(c, cnt);
        }
        ext.end_ok = !text_.empty();
        return ext;
    }
    Interval iv = backward_search(prefix);
    if (iv.empty()) return ext;
    const uint64_t depth = prefix.size();
    // Rows in the interval share the prefix, so the token following it is
    // non-decreasing across rows; walk the runs of equal next-token.
    uint64_t row = iv.lo;
    while (row < iv.hi) {
        Token c = token_after(row, depth);
        uint64_t lo = row + 1, hi = iv.hi;
        while (lo < hi) {  // first row whose next token differs
            uint64_t mid = lo + (hi - lo) / 2;
            if (token_after(mid, depth) == c)
                lo = mid + 1;
            else
                hi = mid;
        }
        if (c <= kSep)
            ext.end_ok = true;
        else
            ext.counts.emplace(c, lo - row);
        row = lo;
    }
    return ext;
}

double FmIndex::fm_score(std::span<const Token> span) const {
    uint64_t cnt = count(span);
    if (cnt == 0) return kNegInf;
    return std::log(static_cast<double>(cnt + 1) / static_cast<double>(N_ + V_));
}

const FmIndex::DocRun* FmIndex::run_at(uint64_t pos) const {
    auto it = std::upper_bound(doc_runs_.begin(), doc_runs_.end(), pos,
                               [](uint64_t p, const DocRun& r) { return p < r.begin; });
    if (it == doc_runs_.begin()) return nullptr;
    --it;
    return (pos >= it->begin && pos < it->end) ? &*it : nullptr;
}

std::vector<ItemId> FmIndex::locate_items(std::span<const Token> span) const {
    std::vector<ItemId> items;
    if (span.empty()) return items;
    Interval iv = backward_search(span);
    for (uint64_t row = iv.lo; row < iv.hi; ++row) {
        uint64_t pos = locate_row(row);
        const DocRun* run = run_at(pos);
        if (run == nullptr) throw InternalError("pattern occurrence outside any span segment");
        items.push_back(run->item_id);
    }
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
    return items;
}

uint32_t FmIndex::max_span_len() const {
    uint64_t best = 0;
    for (const auto& r : doc_runs_) best = std::max(best, r.end - r.begin);
    return static_cast<uint32_t>(best);
}

void FmIndex::save(const std::string& path) const {
    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    put_u64(out, V_);
    put_u64(out, N_);
    put_u32(out, sample_rate_);

    put_u64(out, C_.size());
    for (uint64_t v : C_) put_u64(out, v);

    put_u64(out, bwt_.size());
    for (Token t : bwt_) put_u32(out, t);

    put_u32(out, block_);
    put_u64(out, rank_blocks_.size());
    for (uint32_t v : rank_blocks_) put_u32(out, v);

    put_u64(out, sa_samples_.size());
    for (const auto& [row, pos] : sa_samples_) {
        put_u64(out, row);
        put_u64(out, pos);
    }

    put_u64(out, doc_runs_.size());
    for (const auto& r : doc_runs_) {
        put_u64(out, r.begin);
        put_u64(out, r.end);
        put_i64(out, r.item_id);
        put_u32(out, r.span_index);
    }
    write_file_bytes(path, out);
}

FmIndex FmIndex::load(const std::string& path) {
    ByteReader in(read_file_bytes(path));
    char magic[4];
    in.raw(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw DataError("not an FM-index snapshot: " + path);
    uint32_t version = in.u32();
    if (version != kVersion)
        throw DataError("unsupported FM-index snapshot version " + std::to_string(version));

    FmIndex fm;
    fm.V_ = in.u64();
    fm.N_ = in.u64();
    fm.sample_rate_ = in.u32();

    uint64_t c_len = in.u64();
    if (c_len != fm.V_ + 1) throw DataError("FM-index snapshot: bad cumulative-count section");
    fm.C_.resize(c_len);
    for (auto& v : fm.C_) v = in.u64();

    uint64_t n = in.u64();
    fm.bwt_.resize(n);
    for (auto& t : fm.bwt_) t = in.u32();

    fm.block_ = in.u32();
    uint64_t rb = in.u64();
    fm.rank_blocks_.resize(rb);
    for (auto& v : fm.rank_blocks_) v = in.u32();
    if (fm.block_ == 0 || rb != (n / fm.block_ + 1) * fm.V_)
        throw DataError("FM-index snapshot: bad rank-block section");

    uint64_t ns = in.u64();
    fm.sa_samples_.resize(ns);
    for (auto& [row, pos] : fm.sa_samples_) {
        row = in.u64();
        pos = in.u64();
    }

    uint64_t nr = in.u64();
    fm.doc_runs_.resize(nr);
    for (auto& r : fm.doc_runs_) {
        r.begin = in.u64();
        r.end = in.u64();
        r.item_id = in.i64();
        r.span_index = in.u32();
    }
    if (in.remaining() != 0) throw DataError("FM-index snapshot: trailing bytes");

    // Reconstruct the text by inverting the BWT from the terminator row.
    fm.text_.assign(n, kTerm);
    uint64_t row = 0;  // the unique TERM suffix sorts first
    for (uint64_t p = n - 1; p > 0; --p) {
        fm.text_[p - 1] = fm.bwt_[row];
        row = fm.lf(row);
    }
    fm.text_[n - 1] = kTerm;

    uint64_t real = 0;
    for (const auto& r : fm.doc_runs_) real += r.end - r.begin;
    if (real != fm.N_ || fm.N_ + fm.doc_runs_.size() != n)
        throw DataError("FM-index snapshot: inconsistent document map");
    return fm;
}

}  // namespace genr
