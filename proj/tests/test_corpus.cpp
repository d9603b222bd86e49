#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>

#include "genr/corpus.hpp"

using namespace genr;
namespace fs = std::filesystem;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    fs::path dir = fs::temp_directory_path() / "genr_corpus_test";
    fs::create_directories(dir);
    fs::path p = dir / name;
    std::ofstream out(p, std::ios::trunc);
    out << content;
    return p.string();
}

std::vector<Token> ids(const Catalog& cat, const std::vector<std::string>& toks) {
    return cat.vocab.encode_query(toks);
}

}  // namespace

TEST_CASE("tokenize splits on whitespace, case and punctuation") {
    CHECK(tokenize("Nike Air-Max 90") == std::vector<std::string>{"nike", "air", "max", "90"});
    CHECK(tokenize("ACME   acme") == std::vector<std::string>{"acme", "acme"});
    CHECK(tokenize("").empty());
    CHECK(tokenize("  \t . ,, !").empty());
    CHECK(tokenize("air2max") == std::vector<std::string>{"air", "2", "max"});
    CHECK(tokenize("don't") == std::vector<std::string>{"don", "t"});
    // non-breaking space and a non-ASCII word survive
    CHECK(tokenize("caf\xC3\xA9\xC2\xA0latte") == std::vector<std::string>{"caf\xC3\xA9", "latte"});
}

TEST_CASE("segment is greedy longest-match with unigram fallback") {
    Lexicon lex = Lexicon::from_phrases({{"air", "max"}});
    auto got = segment({"nike", "air", "max", "90"}, lex);
    CHECK(got == std::vector<Ngram>{{"nike"}, {"air", "max"}, {"90"}});

    Lexicon empty;
    CHECK(segment({"a", "b"}, empty) == std::vector<Ngram>{{"a"}, {"b"}});

    Lexicon overlap = Lexicon::from_phrases({{"a", "b"}, {"b", "c"}});
    CHECK(segment({"a", "b", "c"}, overlap) == std::vector<Ngram>{{"a", "b"}, {"c"}});

    Lexicon nested = Lexicon::from_phrases({{"a", "b"}, {"a", "b", "c"}});
    CHECK(segment({"a", "b", "c"}, nested) == std::vector<Ngram>{{"a", "b", "c"}});
}

TEST_CASE("canonical_sort orders n-grams lexicographically and is stable") {
    CHECK(canonical_sort({{"zoo"}, {"apple", "pie"}}) ==
          std::vector<Ngram>{{"apple", "pie"}, {"zoo"}});
    CHECK(canonical_sort({{"a"}, {"a"}}) == std::vector<Ngram>{{"a"}, {"a"}});

    // permutations of the same multiset canonicalize identically
    std::vector<Ngram> base = {{"red"}, {"air", "max"}, {"zoo"}, {"air"}};
    auto sorted = canonical_sort(base);
    std::vector<Ngram> perm = {{"zoo"}, {"air"}, {"red"}, {"air", "max"}};
    CHECK(canonical_sort(perm) == sorted);
}

TEST_CASE("build_spans chunks with trailing-singleton merge") {
    std::vector<Token> five = {10, 11, 12, 13, 14};
    auto spans = build_spans(five, 2);
    REQUIRE(spans.size() == 2);
    CHECK(spans[0] == std::vector<Token>{10, 11});
    CHECK(spans[1] == std::vector<Token>{12, 13, 14});

    std::vector<Token> four = {10, 11, 12, 13};
    spans = build_spans(four, 2);
    REQUIRE(spans.size() == 2);
    CHECK(spans[0] == std::vector<Token>{10, 11});
    CHECK(spans[1] == std::vector<Token>{12, 13});

    // l=8 over a 56-token canonical title gives exactly 7 spans of length 8
    std::vector<Token> long_title(56);
    for (size_t i = 0; i < long_title.size(); ++i) long_title[i] = static_cast<Token>(i + 2);
    spans = build_spans(long_title, 8);
    CHECK(spans.size() == 7);
    for (const auto& s : spans) CHECK(s.size() == 8);

    // degenerate single-token title
    spans = build_spans({42}, 8);
    REQUIRE(spans.size() == 1);
    CHECK(spans[0] == std::vector<Token>{42});
}

TEST_CASE("catalog ingestion canonicalizes and builds the vocabulary") {
    std::string catalog =
        R"({"item_id": 1, "title": "Zoo Apple-Pie bread"})" "\n"
        R"({"item_id": 2, "title": "bread zoo apple pie"})" "\n";
    std::string path = write_temp("catalog_ok.jsonl", catalog);
    Catalog cat = ingest_catalog(path, Lexicon::from_phrases({{"apple", "pie"}}), 2);
    REQUIRE(cat.items.size() == 2);

    // identical n-gram multisets canonicalize to identical span lists
    REQUIRE(cat.items[0].spans.size() == cat.items[1].spans.size());
    for (size_t i = 0; i < cat.items[0].spans.size(); ++i)
        CHECK(cat.items[0].spans[i].tokens == cat.items[1].spans[i].tokens);

    // span concatenation preserves the token multiset of the title
    std::multiset<Token> from_spans, from_title;
    for (const auto& s : cat.items[0].spans) from_spans.insert(s.tokens.begin(), s.tokens.end());
    from_title.insert(cat.items[0].tokens.begin(), cat.items[0].tokens.end());
    CHECK(from_spans == from_title);

    // no reserved ids inside item tokens
    for (const auto& item : cat.items)
        for (Token t : item.tokens) CHECK(t >= Vocabulary::kFirstReal);
}

TEST_CASE("catalog ingestion rejects malformed rows") {
    std::string missing = R"({"item_id": 1})" "\n";
    CHECK_THROWS_WITH_AS(ingest_catalog(write_temp("catalog_m.jsonl", missing), {}, 2),
                         doctest::Contains("line 1"), DataError);

    std::string dup = R"({"item_id": 7, "title": "a b"})" "\n" R"({"item_id": 7, "title": "c d"})" "\n";
    CHECK_THROWS_WITH_AS(ingest_catalog(write_temp("catalog_d.jsonl", dup), {}, 2),
                         doctest::Contains("duplicate item_id"), DataError);

    std::string empty_title = R"({"item_id": 1, "title": "  ...  "})" "\n";
    CHECK_THROWS_WITH_AS(ingest_catalog(write_temp("catalog_e.jsonl", empty_title), {}, 2),
                         doctest::Contains("empty title"), DataError);
}

TEST_CASE("click ingestion checks labels and referential integrity") {
    std::string catalog = R"({"item_id": 1, "title": "red shoe"})" "\n";
    Catalog cat = ingest_catalog(write_temp("catalog_c.jsonl", catalog), {}, 2);

    std::string good = "red\t1\tclick\t100\nred\t1\texpose\t101\n";
    auto clicks = ingest_clicks(write_temp("clicks_ok.tsv", good), cat);
    REQUIRE(clicks.size() == 2);
    CHECK(clicks[0].label == ClickLabel::clicked);
    CHECK(clicks[1].label == ClickLabel::exposed_not_clicked);

    CHECK_THROWS_WITH_AS(ingest_clicks(write_temp("clicks_b1.tsv", "red\t99\tclick\t100\n"), cat),
                         doctest::Contains("unknown item_id"), DataError);
    CHECK_THROWS_WITH_AS(ingest_clicks(write_temp("clicks_b2.tsv", "red\t1\ttap\t100\n"), cat),
                         doctest::Contains("label"), DataError);
    CHECK_THROWS_WITH_AS(ingest_clicks(write_temp("clicks_b3.tsv", "red\t1\tclick\n"), cat),
                         doctest::Contains("4 tab-separated"), DataError);
}

TEST_CASE("expand_pairs emits one sample per span") {
    std::string catalog = R"({"item_id": 3, "title": "alpha beta gamma delta epsilon"})" "\n";
    Catalog cat = ingest_catalog(write_temp("catalog_x.jsonl", catalog), {}, 2);
    const auto& item = cat.items[0];
    REQUIRE(item.spans.size() == 2);  // 5 tokens, l=2 -> [2][3] after merge

    ClickEvent click{"beta", 3, ClickLabel::clicked, 50};
    auto samples = expand_pairs(click, item, cat.vocab);
    REQUIRE(samples.size() == item.spans.size());
    for (size_t i = 0; i < samples.size(); ++i) {
        CHECK(samples[i].query == ids(cat, {"beta"}));
        CHECK(samples[i].target == item.spans[i].tokens);
    }

    ClickEvent expose{"beta", 3, ClickLabel::exposed_not_clicked, 51};
    CHECK(expand_pairs(expose, item, cat.vocab).empty());

    // duplicated events are expanded independently; frequency is signal
    auto twice = expand_pairs(click, item, cat.vocab);
    CHECK(twice.size() == samples.size());
}

TEST_CASE("canonicalization is idempotent") {
    Lexicon lex = Lexicon::from_phrases({{"air", "max"}});
    auto tokens = tokenize("zephyr air max panda air max quartz kiwi");
    auto once = canonical_sort(segment(tokens, lex));
    std::vector<std::string> flat;
    for (const auto& ng : once) flat.insert(flat.end(), ng.begin(), ng.end());
    auto twice = canonical_sort(segment(flat, lex));
    CHECK(once == twice);
}

TEST_CASE("corpus artifact round-trips through JSON lines") {
    std::string catalog =
        R"({"item_id": 1, "title": "red shoe leather"})" "\n"
        R"({"item_id": 2, "title": "red hat wool"})" "\n";
    Catalog cat = ingest_catalog(write_temp("catalog_rt.jsonl", catalog), {}, 2);
    std::string corpus_path = write_temp("corpus_rt.jsonl", "");
    write_corpus(corpus_path, cat);
    Catalog loaded = load_corpus(corpus_path);
    REQUIRE(loaded.items.size() == cat.items.size());
    CHECK(loaded.vocab.size() == cat.vocab.size());
    for (size_t i = 0; i < cat.items.size(); ++i) {
        CHECK(loaded.items[i].item_id == cat.items[i].item_id);
        REQUIRE(loaded.items[i].spans.size() == cat.items[i].spans.size());
        for (size_t j = 0; j < cat.items[i].spans.size(); ++j)
            CHECK(loaded.items[i].spans[j].tokens == cat.items[i].spans[j].tokens);
    }
}

TEST_CASE("query tokens outside the catalog map to UNK") {
    std::string catalog = R"({"item_id": 1, "title": "red shoe"})" "\n";
    Catalog cat = ingest_catalog(write_temp("catalog_u.jsonl", catalog), {}, 2);
    auto q = cat.vocab.encode_query(tokenize("red sneaker"));
    REQUIRE(q.size() == 2);
    CHECK(q[0] >= Vocabulary::kFirstReal);
    CHECK(q[1] == Vocabulary::kUnk);
}
