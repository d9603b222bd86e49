#include "genr/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "genr/common.hpp"

namespace genr {
namespace {

const std::vector<std::string> kBrands = {
    "acme",       "zenith",    "north peak", "solara",     "vertex",    "bluebird",
    "ironwood",   "lumina",    "red river",  "cascadia",   "orion",     "maplecrest",
    "stellar",    "quartz",    "silver fox", "evergreen",  "halcyon",   "tundra",
    "pinnacle",   "westwind",  "coral bay",  "granite",    "aurora",    "driftwood",
};

const std::vector<std::string> kProducts = {
    "running shoe", "trail boot",  "rain jacket",  "down vest",   "wool sweater",
    "denim jean",   "cargo pant",  "flannel shirt", "base layer",  "sun hat",
    "beanie",       "glove",       "hiking sock",  "daypack",     "duffel bag",
    "water bottle", "camp stove",  "sleeping bag", "trek pole",   "headlamp",
    "belt",         "scarf",       "parka",        "windbreaker", "sandal",
    "slipper",      "raincoat",    "tote bag",     "travel mug",  "lunch box",
    "yoga mat",     "gym short",
};

const std::vector<std::string> kAttributes = {
    "black",   "white",    "navy",     "olive",   "crimson", "charcoal", "sand",
    "teal",    "mustard",  "burgundy", "slate",   "ivory",   "cotton",   "wool",
    "leather", "nylon",    "fleece",   "mesh",    "canvas",  "suede",    "ripstop",
    "merino",  "organic",  "recycled", "quilted", "insulated", "waterproof",
    "breathable", "windproof", "packable", "lightweight", "heavyweight", "stretch",
    "slim",    "relaxed",  "classic",  "vintage", "sport",   "outdoor",  "thermal",
    "reflective", "durable", "premium", "eco",    "urban",   "alpine",   "coastal",
    "desert",
};

const std::vector<std::string> kSizes = {
    "xs", "small", "medium", "large", "xl", "xxl", "28", "30", "32", "34", "36", "38", "40", "42",
};

std::vector<std::string> split_words(const std::string& phrase) {
    std::vector<std::string> words;
    std::istringstream in(phrase);
    std::string w;
    while (in >> w) words.push_back(w);
    return words;
}

struct Item {
    ItemId id;
    size_t brand, product;
    std::set<std::string> words;  // all title words, for query matching
    std::string title;
};

}  // namespace

SyntheticStats generate_synthetic(const SyntheticConfig& config, const std::string& catalog_path,
                                  const std::string& clicks_path, const std::string& lexicon_path) {
    if (config.n_items == 0 || config.n_queries == 0 || config.n_clicks == 0)
        throw UsageError("synthetic generator needs positive item, query and click counts");
    SplitMix64 rng(config.seed);

    // Each product family draws from a fixed attribute subset so sorted
    // title chunks repeat across items of the same family.
    std::vector<std::vector<size_t>> family_attrs(kProducts.size());
    for (size_t p = 0; p < kProducts.size(); ++p) {
        std::vector<size_t> pool(kAttributes.size());
        for (size_t i = 0; i < pool.size(); ++i) pool[i] = i;
        for (size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[rng.below(i)]);
        pool.resize(14);
        std::sort(pool.begin(), pool.end());
        family_attrs[p] = std::move(pool);
    }

    std::vector<Item> items;
    items.reserve(config.n_items);
    for (size_t i = 0; i < config.n_items; ++i) {
        Item item;
        item.id = static_cast<ItemId>(1000 + i);
        item.brand = rng.below(kBrands.size());
        item.product = rng.below(kProducts.size());

        std::vector<std::string> words;
        for (const auto& w : split_words(kBrands[item.brand])) words.push_back(w);
        for (const auto& w : split_words(kProducts[item.product])) words.push_back(w);
        const auto& pool = family_attrs[item.product];
        size_t n_attrs = 10 + rng.below(3);  // 10..12
        std::vector<size_t> picks(pool.begin(), pool.end());
        for (size_t j = picks.size(); j > 1; --j) std::swap(picks[j - 1], picks[rng.below(j)]);
        picks.resize(n_attrs);
        for (size_t a : picks) words.push_back(kAttributes[a]);
        words.push_back(kSizes[rng.below(kSizes.size())]);
        words.push_back(kSizes[rng.below(kSizes.size())]);

        item.words.insert(words.begin(), words.end());
        // Raw titles shuffle word order; canonicalization is what restores it.
        for (size_t j = words.size(); j > 1; --j) std::swap(words[j - 1], words[rng.below(j)]);
        std::string title;
        for (const auto& w : words) {
            if (!title.empty()) title += " ";
            title += w;
        }
        item.title = std::move(title);
        items.push_back(std::move(item));
    }

    // Candidate queries with their exact-match item sets.
    struct Query {
        std::string text;
        std::vector<size_t> exact;    // item indices containing every query word
        std::vector<size_t> relaxed;  // sharing at least one word, excluding exact
    };
    auto match_sets = [&](const std::string& text) {
        std::vector<std::string> words = split_words(text);
        std::pair<std::vector<size_t>, std::vector<size_t>> sets;
        for (size_t i = 0; i < items.size(); ++i) {
            size_t shared = 0;
            for (const auto& w : words) shared += items[i].words.count(w);
            if (shared == words.size())
                sets.first.push_back(i);
            else if (shared > 0)
                sets.second.push_back(i);
        }
        return sets;
    };

    std::vector<std::string> candidates;
    std::set<std::string> seen;
    auto add_candidate = [&](const std::string& text) {
        if (seen.insert(text).second) candidates.push_back(text);
    };
    for (const auto& item : items) add_candidate(kBrands[item.brand] + " " + kProducts[item.product]);
    for (const auto& p : kProducts) add_candidate(p);
    for (const auto& b : kBrands) add_candidate(b);
    for (const auto& item : items) {
        const auto& pool = family_attrs[item.product];
        add_candidate(kAttributes[pool[rng.below(pool.size())]] + " " + kProducts[item.product]);
    }
    for (const auto& a : kAttributes) add_candidate(a);

    std::vector<Query> queries;
    for (const auto& text : candidates) {
        auto [exact, relaxed] = match_sets(text);
        if (exact.empty()) continue;
        queries.push_back({text, std::move(exact), std::move(relaxed)});
        if (queries.size() >= config.n_queries * 4) break;
    }
    if (queries.size() < config.n_queries)
        throw InternalError("synthetic generator produced too few candidate queries");
    // Head queries are the generic ones: rank by match-set size.
    std::stable_sort(queries.begin(), queries.end(),
                     [](const Query& a, const Query& b) { return a.exact.size() > b.exact.size(); });
    queries.resize(config.n_queries);

    // Deterministic Zipf click counts per popularity rank.
    double harmonic = 0.0;
    for (size_t r = 1; r <= queries.size(); ++r)
        harmonic += std::pow(static_cast<double>(r), -config.zipf_exponent);
    std::vector<size_t> click_counts(queries.size());
    for (size_t r = 0; r < queries.size(); ++r) {
        double mass = std::pow(static_cast<double>(r + 1), -config.zipf_exponent) / harmonic;
        click_counts[r] = std::max<size_t>(
            1, static_cast<size_t>(std::llround(mass * static_cast<double>(config.n_clicks))));
    }

    struct Event {
        std::string query;
        ItemId item;
        bool clicked;
    };
    std::vector<Event> events;
    for (size_t r = 0; r < queries.size(); ++r) {
        const auto& q = queries[r];
        for (size_t c = 0; c < click_counts[r]; ++c) {
            size_t idx = q.exact[rng.below(q.exact.size())];
            events.push_back({q.text, items[idx].id, true});
            // Roughly one exposure per click: partial matches when available,
            // otherwise a different exact match.
            if (rng.below(100) < 80) {
                if (!q.relaxed.empty()) {
                    size_t e = q.relaxed[rng.below(q.relaxed.size())];
                    events.push_back({q.text, items[e].id, false});
                } else if (q.exact.size() > 1) {
                    size_t e = q.exact[rng.below(q.exact.size())];
                    if (items[e].id != events.back().item)
                        events.push_back({q.text, items[e].id, false});
                }
            }
        }
    }
    for (size_t i = events.size(); i > 1; --i) std::swap(events[i - 1], events[rng.below(i)]);

    SyntheticStats stats;
    stats.items = items.size();
    stats.queries = queries.size();

    std::ofstream cat(catalog_path, std::ios::trunc);
    if (!cat) throw DataError("cannot write catalog: " + catalog_path);
    for (const auto& item : items) {
        nlohmann::json row;
        row["item_id"] = item.id;
        row["title"] = item.title;
        cat << row.dump() << "\n";
    }

    std::ofstream clk(clicks_path, std::ios::trunc);
    if (!clk) throw DataError("cannot write clicks: " + clicks_path);
    int64_t ts = 100000;
    for (const auto& ev : events) {
        clk << ev.query << "\t" << ev.item << "\t" << (ev.clicked ? "click" : "expose") << "\t"
            << ts++ << "\n";
        if (ev.clicked)
            ++stats.click_events;
        else
            ++stats.expose_events;
    }

    std::ofstream lex(lexicon_path, std::ios::trunc);
    if (!lex) throw DataError("cannot write lexicon: " + lexicon_path);
    for (const auto& b : kBrands)
        if (b.find(' ') != std::string::npos) lex << b << "\n";
    for (const auto& p : kProducts)
        if (p.find(' ') != std::string::npos) lex << p << "\n";

    return stats;
}

}  // namespace genr
