#include "genr/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace genr {
namespace {

enum class CharClass { space, letter, digit, punct };

// Minimal UTF-8 decode; malformed bytes classify as punctuation so they are
// dropped rather than corrupting neighbours.
uint32_t decode_utf8(std::string_view s, size_t& i, bool& valid) {
    valid = true;
    unsigned char b0 = static_cast<unsigned char>(s[i]);
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    int extra = 0;
    uint32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        extra = 1;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        extra = 2;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        extra = 3;
        cp = b0 & 0x07;
    } else {
        ++i;
        valid = false;
        return 0;
    }
    if (i + 1 + extra > s.size()) {
        ++i;
        valid = false;
        return 0;
    }
    for (int j = 1; j <= extra; ++j) {
        unsigned char b = static_cast<unsigned char>(s[i + j]);
        if ((b & 0xC0) != 0x80) {
            ++i;
            valid = false;
            return 0;
        }
        cp = (cp << 6) | (b & 0x3F);
    }
    i += 1 + extra;
    return cp;
}

bool is_unicode_space(uint32_t cp) {
    switch (cp) {
        case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
        case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
        case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200A;
    }
}

CharClass classify(uint32_t cp) {
    if (is_unicode_space(cp)) return CharClass::space;
    if (cp >= '0' && cp <= '9') return CharClass::digit;
    if ((cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z')) return CharClass::letter;
    if (cp >= 0x80) return CharClass::letter;  // non-ASCII, non-space: treat as letter
    return CharClass::punct;
}

void append_lowered(std::string& out, uint32_t cp) {
    if (cp >= 'A' && cp <= 'Z') cp += 'a' - 'A';
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string cur;
    CharClass cur_class = CharClass::space;
    auto flush = [&]() {
        if (!cur.empty() && (cur_class == CharClass::letter || cur_class == CharClass::digit))
            tokens.push_back(cur);
        cur.clear();
    };
    size_t i = 0;
    while (i < text.size()) {
        bool valid = false;
        uint32_t cp = decode_utf8(text, i, valid);
        CharClass cls = valid ? classify(cp) : CharClass::punct;
        if (cls != cur_class) {
            flush();
            cur_class = cls;
        }
        if (cls == CharClass::letter || cls == CharClass::digit) append_lowered(cur, cp);
    }
    flush();
    return tokens;
}

void Lexicon::add(const std::vector<std::string>& phrase) {
    if (phrase.size() < 2) return;
    auto& bucket = by_first_[phrase.front()];
    bucket.push_back(phrase);
    std::stable_sort(bucket.begin(), bucket.end(),
                     [](const auto& a, const auto& b) { return a.size() > b.size(); });
    ++count_;
}

Lexicon Lexicon::from_phrases(const std::vector<std::vector<std::string>>& phrases) {
    Lexicon lex;
    for (const auto& p : phrases) lex.add(p);
    return lex;
}

Lexicon Lexicon::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open lexicon file: " + path);
    Lexicon lex;
    std::string line;
    while (std::getline(in, line)) {
        auto toks = tokenize(line);
        if (!toks.empty()) lex.add(toks);
    }
    return lex;
}

size_t Lexicon::longest_match(const std::vector<std::string>& tokens, size_t pos) const {
    auto it = by_first_.find(tokens[pos]);
    if (it == by_first_.end()) return 0;
    for (const auto& phrase : it->second) {
        if (pos + phrase.size() > tokens.size()) continue;
        bool match = true;
        for (size_t j = 1; j < phrase.size(); ++j) {
            if (tokens[pos + j] != phrase[j]) {
                match = false;
                break;
            }
        }
        if (match) return phrase.size();
    }
    return 0;
}

std::vector<Ngram> segment(const std::vector<std::string>& tokens, const Lexicon& lexicon) {
    std::vector<Ngram> out;
    size_t i = 0;
    while (i < tokens.size()) {
        size_t len = lexicon.longest_match(tokens, i);
        if (len < 2) len = 1;
        out.emplace_back(tokens.begin() + static_cast<long>(i),
                         tokens.begin() + static_cast<long>(i + len));
        i += len;
    }
    return out;
}

std::vector<Ngram> canonical_sort(std::vector<Ngram> ngrams) {
    std::stable_sort(ngrams.begin(), ngrams.end());
    return ngrams;
}

std::vector<std::vector<Token>> build_spans(const std::vector<Token>& sorted_tokens, uint32_t l) {
    if (l < 2) throw InternalError("span length must be at least 2");
    std::vector<std::vector<Token>> spans;
    const size_t n = sorted_tokens.size();
    if (n == 0) return spans;
    if (n < 2) {
        spans.push_back(sorted_tokens);
        return spans;
    }
    for (size_t i = 0; i < n; i += l) {
        size_t end = std::min(n, i + l);
        spans.emplace_back(sorted_tokens.begin() + static_cast<long>(i),
                           sorted_tokens.begin() + static_cast<long>(end));
    }
    if (spans.size() > 1 && spans.back().size() == 1) {
        Token tail = spans.back()[0];
        spans.pop_back();
        spans.back().push_back(tail);
    }
    return spans;
}

std::vector<SftSample> expand_pairs(const ClickEvent& click, const ItemRecord& item,
                                    const Vocabulary& vocab) {
    if (click.label != ClickLabel::clicked) return {};
    auto query_tokens = tokenize(click.query);
    if (query_tokens.empty()) throw DataError("empty query in click event");
    std::vector<Token> query_ids = vocab.encode_query(query_tokens);
    std::vector<SftSample> samples;
    samples.reserve(item.spans.size());
    for (const auto& span : item.spans) samples.push_back({query_ids, span.tokens});
    return samples;
}

const ItemRecord& Catalog::item(ItemId id) const {
    auto it = index_by_id.find(id);
    if (it == index_by_id.end()) throw DataError("unknown item_id: " + std::to_string(id));
    return items[it->second];
}

namespace {

struct RawItem {
    ItemId id;
    std::string title;
    std::vector<Ngram> canonical;  // segmented + sorted n-grams, as strings
    std::vector<std::string> raw_tokens;
};

Catalog assemble_catalog(std::vector<RawItem> raw, uint32_t l, TaskMode mode) {
    std::set<std::string> token_set;
    for (const auto& r : raw)
        for (const auto& t : r.raw_tokens) token_set.insert(t);
    Catalog cat;
    cat.vocab = Vocabulary::build(token_set);
    cat.span_len = l;
    cat.items.reserve(raw.size());
    for (auto& r : raw) {
        ItemRecord rec;
        rec.item_id = r.id;
        rec.raw_title = std::move(r.title);
        for (const auto& t : r.raw_tokens) rec.tokens.push_back(cat.vocab.id_or_unk(t));
        std::vector<Token> canonical;
        for (const auto& ng : r.canonical)
            for (const auto& t : ng) canonical.push_back(cat.vocab.id_or_unk(t));
        std::vector<std::vector<Token>> spans;
        if (mode == TaskMode::title) {
            spans.push_back(canonical);
        } else {
            spans = build_spans(canonical, l);
        }
        uint32_t j = 1;
        for (auto& s : spans) rec.spans.push_back({std::move(s), j++});
        cat.index_by_id.emplace(rec.item_id, cat.items.size());
        cat.items.push_back(std::move(rec));
    }
    return cat;
}

}  // namespace

Catalog ingest_catalog(const std::string& path, const Lexicon& lexicon, uint32_t l,
                       TaskMode mode) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open catalog file: " + path);
    std::vector<RawItem> raw;
    std::set<ItemId> seen;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json row;
        try {
            row = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError("catalog line " + std::to_string(lineno) + ": " + e.what());
        }
        if (!row.is_object() || !row.contains("item_id") || !row.contains("title") ||
            !row["item_id"].is_number_integer() || !row["title"].is_string())
            throw DataError("catalog line " + std::to_string(lineno) +
                            ": expected {\"item_id\": int, \"title\": str}");
        RawItem r;
        r.id = row["item_id"].get<ItemId>();
        r.title = row["title"].get<std::string>();
        if (r.id < 0)
            throw DataError("catalog line " + std::to_string(lineno) + ": negative item_id");
        if (!seen.insert(r.id).second)
            throw DataError("catalog line " + std::to_string(lineno) + ": duplicate item_id " +
                            std::to_string(r.id));
        r.raw_tokens = tokenize(r.title);
        if (r.raw_tokens.empty())
            throw DataError("catalog line " + std::to_string(lineno) + ": empty title");
        r.canonical = canonical_sort(segment(r.raw_tokens, lexicon));
        raw.push_back(std::move(r));
    }
    if (raw.empty()) throw DataError("catalog is empty: " + path);
    return assemble_catalog(std::move(raw), l, mode);
}

std::vector<ClickEvent> ingest_clicks(const std::string& path, const Catalog& catalog) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open clicks file: " + path);
    std::vector<ClickEvent> events;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        size_t start = 0;
        while (true) {
            size_t tab = line.find('\t', start);
            if (tab == std::string::npos) {
                fields.push_back(line.substr(start));
                break;
            }
            fields.push_back(line.substr(start, tab - start));
            start = tab + 1;
        }
        if (fields.size() != 4)
            throw DataError("clicks line " + std::to_string(lineno) + ": expected 4 tab-separated fields");
        ClickEvent ev;
        ev.query = fields[0];
        try {
            ev.item_id = std::stoll(fields[1]);
            ev.timestamp = std::stoll(fields[3]);
        } catch (const std::exception&) {
            throw DataError("clicks line " + std::to_string(lineno) + ": malformed number");
        }
        if (fields[2] == "click") {
            ev.label = ClickLabel::clicked;
        } else if (fields[2] == "expose") {
            ev.label = ClickLabel::exposed_not_clicked;
        } else {
            throw DataError("clicks line " + std::to_string(lineno) + ": label must be click or expose");
        }
        if (catalog.index_by_id.find(ev.item_id) == catalog.index_by_id.end())
            throw DataError("clicks line " + std::to_string(lineno) + ": unknown item_id " +
                            std::to_string(ev.item_id));
        if (tokenize(ev.query).empty())
            throw DataError("clicks line " + std::to_string(lineno) + ": empty query");
        events.push_back(std::move(ev));
    }
    return events;
}

void write_corpus(const std::string& path, const Catalog& catalog) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot open corpus file for writing: " + path);
    for (const auto& item : catalog.items) {
        nlohmann::json row;
        row["item_id"] = item.item_id;
        nlohmann::json spans = nlohmann::json::array();
        for (const auto& span : item.spans) {
            nlohmann::json toks = nlohmann::json::array();
            for (Token t : span.tokens) toks.push_back(catalog.vocab.token(t));
            spans.push_back(std::move(toks));
        }
        row["spans"] = std::move(spans);
        out << row.dump() << "\n";
    }
    if (!out) throw DataError("short write: " + path);
}

Catalog load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open corpus file: " + path);
    struct Row {
        ItemId id;
        std::vector<std::vector<std::string>> spans;
    };
    std::vector<Row> rows;
    std::set<std::string> token_set;
    std::string line;
    size_t lineno = 0;
    uint32_t max_span = 2;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json row;
        try {
            row = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError("corpus line " + std::to_string(lineno) + ": " + e.what());
        }
        Row r;
        r.id = row.at("item_id").get<ItemId>();
        for (const auto& span : row.at("spans")) {
            std::vector<std::string> toks;
            for (const auto& t : span) {
                toks.push_back(t.get<std::string>());
                token_set.insert(toks.back());
            }
            if (toks.empty()) throw DataError("corpus line " + std::to_string(lineno) + ": empty span");
            max_span = std::max<uint32_t>(max_span, static_cast<uint32_t>(toks.size()));
            r.spans.push_back(std::move(toks));
        }
        if (r.spans.empty())
            throw DataError("corpus line " + std::to_string(lineno) + ": item has no spans");
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw DataError("corpus is empty: " + path);
    Catalog cat;
    cat.vocab = Vocabulary::build(token_set);
    cat.span_len = max_span;  // conservative; the config carries the authoritative l
    for (auto& r : rows) {
        ItemRecord rec;
        rec.item_id = r.id;
        uint32_t j = 1;
        for (auto& span : r.spans) {
            SpanIdentifier si;
            si.span_index = j++;
            for (const auto& t : span) si.tokens.push_back(cat.vocab.id_or_unk(t));
            rec.tokens.insert(rec.tokens.end(), si.tokens.begin(), si.tokens.end());
            rec.spans.push_back(std::move(si));
        }
        if (cat.index_by_id.count(rec.item_id))
            throw DataError("corpus: duplicate item_id " + std::to_string(rec.item_id));
        cat.index_by_id.emplace(rec.item_id, cat.items.size());
        cat.items.push_back(std::move(rec));
    }
    return cat;
}

}  // namespace genr
