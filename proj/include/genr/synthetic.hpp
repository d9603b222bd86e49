#pragma once

#include <cstdint>
#include <string>

namespace genr {

// Seeded generator for a desk-scale product catalog with long templated
// titles (brand + product + attributes + sizes), a lexicon of multi-word
// phrases, and a click log whose query popularity follows a Zipf curve so
// that queries with fewer than 5 clicks make up roughly 80% of all queries.
struct SyntheticConfig {
    uint64_t seed = 42;
    size_t n_items = 500;
    size_t n_queries = 200;
    size_t n_clicks = 2000;  // Zipf mass; actual events include a minimum of 1 per query
    double zipf_exponent = 1.3;
};

struct SyntheticStats {
    size_t items = 0;
    size_t queries = 0;
    size_t click_events = 0;
    size_t expose_events = 0;
};

SyntheticStats generate_synthetic(const SyntheticConfig& config, const std::string& catalog_path,
                                  const std::string& clicks_path, const std::string& lexicon_path);

}  // namespace genr
