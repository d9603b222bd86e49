#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "genr/common.hpp"
#include "genr/vocab.hpp"

namespace genr {

// One of the m identifiers of an item: a chunk of the canonicalized title.
struct SpanIdentifier {
    std::vector<Token> tokens;
    uint32_t span_index = 0;  // 1-based position within the item
};

struct ItemRecord {
    ItemId item_id = 0;
    std::string raw_title;
    std::vector<Token> tokens;  // raw-order title tokens
    std::vector<SpanIdentifier> spans;
};

enum class ClickLabel { clicked, exposed_not_clicked };

struct ClickEvent {
    std::string query;
    ItemId item_id = 0;
    ClickLabel label = ClickLabel::clicked;
    int64_t timestamp = 0;
};

// Multi-token phrases used by the segmenter (brand names, product names,
// size words). Single-token phrases are redundant and ignored.
class Lexicon {
  public:
    Lexicon() = default;
    static Lexicon from_file(const std::string& path);
    static Lexicon from_phrases(const std::vector<std::vector<std::string>>& phrases);

    void add(const std::vector<std::string>& phrase);
    // Longest phrase starting at tokens[pos]; 0 when none matches.
    size_t longest_match(const std::vector<std::string>& tokens, size_t pos) const;
    size_t size() const { return count_; }

  private:
    // first token -> phrases ordered longest first
    std::map<std::string, std::vector<std::vector<std::string>>> by_first_;
    size_t count_ = 0;
};

enum class TaskMode { multi_span, title };

struct Catalog {
    std::vector<ItemRecord> items;
    Vocabulary vocab;
    uint32_t span_len = 8;  // the l used to chunk canonical titles
    std::map<ItemId, size_t> index_by_id;

    const ItemRecord& item(ItemId id) const;
};

// Lowercases and splits on Unicode whitespace and at letter/digit/punctuation
// boundaries; punctuation-only runs are dropped. Returns {} for
// whitespace-only input; callers decide whether that is an error.
std::vector<std::string> tokenize(std::string_view text);

using Ngram = std::vector<std::string>;

// Greedy longest-match left-to-right; uncovered tokens become unigrams.
std::vector<Ngram> segment(const std::vector<std::string>& tokens, const Lexicon& lexicon);

// Stable lexicographic sort by token strings; the canonical title order.
std::vector<Ngram> canonical_sort(std::vector<Ngram> ngrams);

// Chunks a flattened canonical token sequence into spans of length l,
// merging a trailing singleton into the previous span. A title shorter than
// two tokens yields a single span as-is.
std::vector<std::vector<Token>> build_spans(const std::vector<Token>& sorted_tokens, uint32_t l);

struct SftSample {
    std::vector<Token> query;
    std::vector<Token> target;
};

// One clicked <query, item> event becomes m <query, span> samples.
std::vector<SftSample> expand_pairs(const ClickEvent& click, const ItemRecord& item,
                                    const Vocabulary& vocab);

// Catalog ingestion: JSON-lines {"item_id": int, "title": str}. Builds the
// vocabulary from catalog tokens and canonicalizes every title. In title
// mode the whole canonical title becomes the single span.
Catalog ingest_catalog(const std::string& path, const Lexicon& lexicon, uint32_t l,
                       TaskMode mode = TaskMode::multi_span);

// Clicks: query<TAB>item_id<TAB>label<TAB>timestamp with label in
// {click, expose}. Every item_id must exist in the catalog.
std::vector<ClickEvent> ingest_clicks(const std::string& path, const Catalog& catalog);

// Canonicalized corpus artifact: JSON-lines {"item_id": int, "spans": [[token,...],...]}.
void write_corpus(const std::string& path, const Catalog& catalog);
Catalog load_corpus(const std::string& path);

}  // namespace genr
