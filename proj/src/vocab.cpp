// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "phraseadapt/vocab.hpp"

#include <cctype>

#include "phraseadapt/errors.hpp"
#include "phraseadapt/io.hpp"

namespace phraseadapt {

Vocab::Vocab() {
  tokens_.emplace_back(kUnkToken);
  ids_.emplace(tokens_.back(), kUnkId);
}

TokenId Vocab::intern(std::string_view token) {
  if (token.empty()) throw InputError("cannot intern an empty token");
  for (char c : token) {
    if (std::isspace(static_cast<unsigned char>(c)))
      throw InputError("token contains whitespace: '" + std::string(token) + "'");
  }
  if (token == kFieldSeparator)
    throw FormatError("'|||' is reserved as the field separator");
  auto it = ids_.find(token);
  if (it != ids_.end()) return it->second;
  TokenId id = static_cast<TokenId>(tokens_.size());
  tokens_.emplace_back(token);
  ids_.emplace(tokens_.back(), id);
  return id;
}

TokenId Vocab::lookup(std::string_view token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnkId : it->second;
}

std::string_view Vocab::resolve(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw InputError("unknown token id " + std::to_string(id));
  return tokens_[static_cast<std::size_t>(id)];
}

bool Vocab::contains(std::string_view token) const {
  return ids_.find(token) != ids_.end();
}

Phrase parse_phrase(Vocab& vocab, std::string_view text) {
  Phrase phrase;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) phrase.ids.push_back(vocab.intern(text.substr(start, i - start)));
  }
  if (phrase.ids.empty()) throw InputError("empty phrase");
  return phrase;
}

std::string serialize_tokens(const Vocab& vocab, std::span<const TokenId> ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i > 0) out += ' ';
    out += vocab.resolve(ids[i]);
  }
  return out;
}

std::string serialize_phrase(const Vocab& vocab, const Phrase& phrase) {
  return serialize_tokens(vocab, phrase.ids);
}

}  // namespace phraseadapt
