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
//
// Token interning and the phrase representation shared by all components.
// Tokens are byte-exact: no case folding, no Unicode normalization, since
// token strings double as table keys.

#ifndef PHRASEADAPT_VOCAB_HPP_
#define PHRASEADAPT_VOCAB_HPP_

#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace phraseadapt {

using TokenId = std::int32_t;

inline constexpr TokenId kUnkId = 0;
inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kFieldSeparator = "|||";

// Bidirectional token <-> id map.  Ids are dense and assigned in first-seen
// order, so interning the same stream twice yields the same ids.  Intended
// usage is a single-writer build phase followed by an immutable query phase;
// concurrent interning is not supported.
class Vocab {
 public:
  Vocab();

  // Interns `token` and returns its id.  Repeated calls return the same id.
  // Throws InputError for empty tokens or tokens containing whitespace,
  // FormatError for the reserved "|||" separator.
  TokenId intern(std::string_view token);

  // Returns the id if known, kUnkId otherwise.  Does not extend the vocab.
  TokenId lookup(std::string_view token) const;

  std::string_view resolve(TokenId id) const;
  bool contains(std::string_view token) const;
  std::size_t size() const { return tokens_.size(); }

 private:
  // deque keeps token storage stable, so the string_view keys stay valid.
  std::deque<std::string> tokens_;
  std::unordered_map<std::string_view, TokenId> ids_;
};

// Non-empty token-id sequence; the unit of all matching and scoring.
struct Phrase {
  std::vector<TokenId> ids;

  std::size_t size() const { return ids.size(); }
  bool operator==(const Phrase& o) const = default;
};

struct PhraseHash {
  std::size_t operator()(std::span<const TokenId> ids) const {
    // FNV-1a over the id bytes.
    std::uint64_t h = 1469598103934665603ull;
    for (TokenId id : ids) {
      std::uint32_t u = static_cast<std::uint32_t>(id);
      for (int i = 0; i < 4; ++i) {
        h ^= (u >> (8 * i)) & 0xff;
        h *= 1099511628211ull;
      }
    }
    return static_cast<std::size_t>(h);
  }
  std::size_t operator()(const Phrase& p) const {
    return (*this)(std::span<const TokenId>(p.ids));
  }
  std::size_t operator()(const std::vector<TokenId>& v) const {
    return (*this)(std::span<const TokenId>(v));
  }
};

// Splits on runs of ASCII whitespace and interns every token.
// Throws InputError on empty/blank text, FormatError on a "|||" token.
Phrase parse_phrase(Vocab& vocab, std::string_view text);

// Space-joined token strings; inverse of parse_phrase at the token level.
std::string serialize_phrase(const Vocab& vocab, const Phrase& phrase);
std::string serialize_tokens(const Vocab& vocab, std::span<const TokenId> ids);

}  // namespace phraseadapt

#endif  // PHRASEADAPT_VOCAB_HPP_
