// Test-only reference implementations, independent of the production code
// paths they check: naive span scans for FM-index counting/location, central
// finite differences for gradients, and exhaustive completion enumeration
// for the constrained decoder.
#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <vector>

#include "genr/common.hpp"
#include "genr/model.hpp"

namespace oracle {

using genr::ItemId;
using genr::Token;

using SpanCorpus = std::vector<std::pair<ItemId, std::vector<std::vector<Token>>>>;

// Occurrences of the pattern as a contiguous subsequence of any single span.
inline uint64_t naive_count(const SpanCorpus& corpus, const std::vector<Token>& pattern) {
    if (pattern.empty()) {
        uint64_t n = 0;
        for (const auto& [id, spans] : corpus)
            for (const auto& s : spans) n += s.size();
        return n;
    }
    uint64_t count = 0;
    for (const auto& [id, spans] : corpus)
        for (const auto& s : spans) {
            if (s.size() < pattern.size()) continue;
            for (size_t i = 0; i + pattern.size() <= s.size(); ++i) {
                bool match = true;
                for (size_t j = 0; j < pattern.size(); ++j)
                    if (s[i + j] != pattern[j]) {
                        match = false;
                        break;
                    }
                if (match) ++count;
            }
        }
    return count;
}

inline std::set<ItemId> naive_locate(const SpanCorpus& corpus, const std::vector<Token>& pattern) {
    std::set<ItemId> items;
    if (pattern.empty()) return items;
    for (const auto& [id, spans] : corpus) {
        bool found = false;
        for (const auto& s : spans) {
            if (s.size() < pattern.size()) continue;
            for (size_t i = 0; !found && i + pattern.size() <= s.size(); ++i) {
                bool match = true;
                for (size_t j = 0; j < pattern.size(); ++j)
                    if (s[i + j] != pattern[j]) {
                        match = false;
                        break;
                    }
                if (match) found = true;
            }
            if (found) break;
        }
        if (found) items.insert(id);
    }
    return items;
}

// Tokens that can follow the prefix somewhere, with counts, plus whether the
// prefix ends at a span boundary anywhere.
inline std::pair<std::map<Token, uint64_t>, bool> naive_extensions(
    const SpanCorpus& corpus, const std::vector<Token>& prefix) {
    std::map<Token, uint64_t> counts;
    bool end_ok = false;
    for (const auto& [id, spans] : corpus)
        for (const auto& s : spans) {
            if (s.size() < prefix.size()) continue;
            for (size_t i = 0; i + prefix.size() <= s.size(); ++i) {
                bool match = true;
                for (size_t j = 0; j < prefix.size(); ++j)
                    if (s[i + j] != prefix[j]) {
                        match = false;
                        break;
                    }
                if (!match) continue;
                size_t after = i + prefix.size();
                if (after < s.size())
                    ++counts[s[after]];
                else if (!prefix.empty())
                    end_ok = true;
            }
        }
    if (prefix.empty()) end_ok = true;
    return {counts, end_ok};
}

// All distinct sequences that the constrained decoder can complete: contiguous
// subsequences of a span whose last token is the span's last token.
inline std::set<std::vector<Token>> completable_substrings(const SpanCorpus& corpus,
                                                           size_t max_len) {
    std::set<std::vector<Token>> out;
    for (const auto& [id, spans] : corpus)
        for (const auto& s : spans)
            for (size_t start = 0; start < s.size(); ++start) {
                if (s.size() - start > max_len) continue;
                out.emplace(s.begin() + static_cast<long>(start), s.end());
            }
    return out;
}

// Central finite difference of a scalar function at one coordinate.
inline double central_difference(const std::function<double()>& eval, double* coord, double step) {
    const double saved = *coord;
    *coord = saved + step;
    double hi = eval();
    *coord = saved - step;
    double lo = eval();
    *coord = saved;
    return (hi - lo) / (2.0 * step);
}

inline double relative_error(double a, double b) {
    double denom = std::max(std::abs(a), std::abs(b));
    if (denom < 1e-10) return 0.0;
    return std::abs(a - b) / denom;
}

}  // namespace oracle
