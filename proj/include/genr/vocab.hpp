#pragma once

#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "genr/common.hpp"

namespace genr {

// Token/id bijection over the catalog vocabulary. Id 0 is the EOS sentinel
// and id 1 is UNK; UNK appears only in query token sequences, never in item
// identifiers. Real tokens get dense ids from 2 upward in lexicographic
// order, so comparing id sequences is the same as comparing token strings.
class Vocabulary {
  public:
    static constexpr Token kEos = 0;
    static constexpr Token kUnk = 1;
    static constexpr Token kFirstReal = 2;

    Vocabulary() = default;

    static Vocabulary build(const std::set<std::string>& tokens);

    // Id for a token; UNK when absent.
    Token id_or_unk(const std::string& tok) const;
    bool contains(const std::string& tok) const;
    const std::string& token(Token id) const;

    // Total alphabet size including the two reserved ids.
    size_t size() const { return id_to_token_.size(); }

    std::vector<Token> encode_query(const std::vector<std::string>& tokens) const;

  private:
    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, Token> token_to_id_;
};

}  // namespace genr
