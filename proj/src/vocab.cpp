#include "genr/vocab.hpp"

namespace genr {

Vocabulary Vocabulary::build(const std::set<std::string>& tokens) {
    Vocabulary v;
    v.id_to_token_.reserve(tokens.size() + 2);
    v.id_to_token_.push_back("<eos>");
    v.id_to_token_.push_back("<unk>");
    for (const auto& tok : tokens) {  // std::set iterates in sorted order
        v.token_to_id_.emplace(tok, static_cast<Token>(v.id_to_token_.size()));
        v.id_to_token_.push_back(tok);
    }
    return v;
}

Token Vocabulary::id_or_unk(const std::string& tok) const {
    auto it = token_to_id_.find(tok);
    return it == token_to_id_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(const std::string& tok) const {
    return token_to_id_.count(tok) != 0;
}

const std::string& Vocabulary::token(Token id) const {
    if (id >= id_to_token_.size()) throw InternalError("token id out of range");
    return id_to_token_[id];
}

std::vector<Token> Vocabulary::encode_query(const std::vector<std::string>& tokens) const {
    std::vector<Token> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(id_or_unk(t));
    return ids;
}

}  // namespace genr
