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
// ARPA-style back-off n-gram language model: parsing, serialization,
// conditional and sequence queries, n-gram insertion, and native
// renormalization of back-off weights after insertion.
//
// Conventions (SRILM-compatible):
//   - log10 probabilities and back-off weights;
//   - a stored log probability of exactly -99 marks a context-only
//     placeholder: queries for such entries fall through to back-off,
//     only the back-off weight (if any) is meaningful;
//   - entries of the highest order carry no back-off weight.

#ifndef PHRASEADAPT_NGRAM_LM_HPP_
#define PHRASEADAPT_NGRAM_LM_HPP_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "phraseadapt/io.hpp"
#include "phraseadapt/vocab.hpp"

namespace phraseadapt {

inline constexpr double kPlaceholderLogProb = -99.0;
// log10 probability assigned to fully-OOV words when no <unk> unigram exists.
inline constexpr double kOovFloorLogProb = -10.0;
// Over-mass clamp: explicit continuations of a context are scaled down to
// total at most 1 - kRenormEpsilon before the back-off weight is computed.
inline constexpr double kRenormEpsilon = 1e-6;

struct NgramEntry {
  double logprob = 0.0;      // log10 p(last word | preceding words)
  double backoff = 0.0;      // log10 back-off weight, valid iff has_backoff
  bool has_backoff = false;
  bool placeholder = false;  // context-only shell (ARPA -99 convention)
};

class NgramLm {
 public:
  explicit NgramLm(int order);

  int order() const { return order_; }
  std::uint64_t entry_count(int order) const;
  std::uint64_t total_entries() const;

  const NgramEntry* find(std::span<const TokenId> ngram) const;
  // Inserts or replaces; `ngram` length must be in [1, order].
  void set(std::span<const TokenId> ngram, const NgramEntry& entry);

  // Katz back-off query; total over any (context, word) including OOV.
  // Contexts longer than order-1 are truncated to their last order-1 words.
  double cond_logprob(std::span<const TokenId> context, TokenId word) const;

  // Sum of per-word conditionals over the phrase.  No sentence-boundary
  // markers are added: phrases are mid-sentence fragments, so the first
  // word is scored by its (backed-off) unigram probability.
  double sequence_logprob(const Phrase& phrase) const;

  // Adds (ngram, log10 prob) entries.  Existing non-placeholder entries win
  // over incoming ones; placeholders are upgraded in place.  Missing
  // back-off-chain prefixes are auto-inserted as placeholders, and the final
  // word of each inserted n-gram is guaranteed a real unigram (OOV floor if
  // it had none) so the model stays normalizable.  Call renormalize() after.
  void insert_ngrams(std::span<const std::pair<Phrase, double>> entries);

  // Recomputes every back-off weight bottom-up so that each explicit
  // context's full conditional distribution sums to 1.  Contexts whose
  // explicit mass reaches 1 are clamped to 1 - kRenormEpsilon first.
  // Throws NumericalError when a lower-order distribution is degenerate
  // (backed-off mass of the explicit continuations >= 1).
  void renormalize(const Vocab& vocab);

  // Deterministic iteration in canonical order (ascending order, entries
  // sorted by token strings).  Used by serialization and extraction.
  void for_each_sorted(const Vocab& vocab, int order,
                       const std::function<void(std::span<const TokenId>,
                                                const NgramEntry&)>& fn) const;

 private:
  using Map = std::unordered_map<std::vector<TokenId>, NgramEntry, PhraseHash>;

  Map& level(std::size_t n) { return orders_[n - 1]; }
  const Map& level(std::size_t n) const { return orders_[n - 1]; }

  int order_;
  std::vector<Map> orders_;  // orders_[k] holds (k+1)-grams

  friend NgramLm parse_arpa(LineSource&, Vocab&);
  friend void serialize_arpa(const NgramLm&, const Vocab&, std::ostream&);
};

// Parses ARPA text (tab or space separated).  Declared counts must match
// loaded counts; throws FormatError with a line number otherwise.
NgramLm parse_arpa(LineSource& source, Vocab& vocab);
NgramLm parse_arpa_file(const std::string& path, Vocab& vocab);

// Canonical ARPA: sections ascending, entries sorted by token strings,
// log values with 7 significant digits, tab-separated fields.
void serialize_arpa(const NgramLm& lm, const Vocab& vocab, std::ostream& out);
std::string serialize_arpa_string(const NgramLm& lm, const Vocab& vocab);

// Add-k-smoothed back-off model over `corpus` (a fixture/tooling estimator,
// not a production smoother).  The result passes renormalize as a fixed
// point.  Throws InputError on an empty corpus, k <= 0, or order < 1.
NgramLm train_addk_lm(const std::vector<Phrase>& corpus, int order, double k,
                      const Vocab& vocab);

}  // namespace phraseadapt

#endif  // PHRASEADAPT_NGRAM_LM_HPP_
