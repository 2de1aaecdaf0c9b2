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
// Connecting-phrase machinery: affix indexes over one side of the in-domain
// phrase table, the split-based connecting test, phrase-pair classification,
// and candidate extraction from out-of-domain resources.
//
// A phrase w_1..w_i is connecting at split k (1 <= k <= i-1) when some
// in-domain phrase ends with w_1..w_k and some in-domain phrase starts with
// w_{k+1}..w_i.  Only single splits (two segments) are ever considered.

#ifndef PHRASEADAPT_CONNECTING_HPP_
#define PHRASEADAPT_CONNECTING_HPP_

#include <cstdint>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "phraseadapt/ngram_lm.hpp"
#include "phraseadapt/phrase_table.hpp"
#include "phraseadapt/vocab.hpp"

namespace phraseadapt {

struct AffixIndexOptions {
  // Affixes are indexed up to this length; in-domain phrases no longer than
  // it (the usual extraction limit) are therefore indexed exactly.
  int max_affix_len = 7;
  // Per-affix occurrence lists are capped to bound OP enumeration cost;
  // membership (connecting or not) is unaffected, overflow is counted.
  std::uint32_t occurrence_cap = 1000;
};

// Split indices satisfying the connecting condition; empty = not connecting.
struct SplitWitness {
  std::vector<int> splits;
  bool connecting() const { return !splits.empty(); }
  bool operator==(const SplitWitness&) const = default;
};

enum class ConnectCase {
  kBoth,        // case a: source and target both connecting
  kSourceOnly,  // case c
  kTargetOnly,  // case d
  kNone,
};

// Accepted-case policy.  Case b ("either side") is the union a+c+d.
struct CasePolicy {
  bool both = true;
  bool source_only = false;
  bool target_only = false;

  bool accepts(ConnectCase c) const {
    switch (c) {
      case ConnectCase::kBoth: return both;
      case ConnectCase::kSourceOnly: return source_only;
      case ConnectCase::kTargetOnly: return target_only;
      case ConnectCase::kNone: return false;
    }
    return false;
  }
  // Parses letter sets like "a", "b", "acd".  Throws InputError otherwise.
  static CasePolicy parse(std::string_view letters);
};

char case_letter(ConnectCase c);

// Prefix and suffix maps over one side of the in-domain phrase table.
// Immutable once built; concurrent queries are safe.
class AffixIndex {
 public:
  explicit AffixIndex(AffixIndexOptions options = {});

  void add_phrase(const Phrase& phrase);
  // Sorts and caps occurrence lists; must be called once after the last add.
  void finalize();

  // Occurrence lists refer to positions in phrases().
  const std::vector<Phrase>& phrases() const { return pool_; }
  std::span<const std::uint32_t> prefix_occurrences(std::span<const TokenId> affix) const;
  std::span<const std::uint32_t> suffix_occurrences(std::span<const TokenId> affix) const;

  SplitWitness is_connecting(const Phrase& phrase) const;

  const AffixIndexOptions& options() const { return options_; }
  std::uint64_t affix_entries() const { return prefix_.size() + suffix_.size(); }
  std::uint64_t overflowed_affixes() const { return overflowed_; }

 private:
  struct OccList {
    std::vector<std::uint32_t> ids;
  };
  using AffixMap = std::unordered_map<std::vector<TokenId>, OccList, PhraseHash>;

  AffixIndexOptions options_;
  std::vector<Phrase> pool_;  // distinct in-domain phrases, first-seen order
  std::unordered_map<std::vector<TokenId>, std::uint32_t, PhraseHash> pool_ids_;
  AffixMap prefix_;
  AffixMap suffix_;  // keyed by reversed affix, sharing the prefix layout
  std::uint64_t overflowed_ = 0;
  bool finalized_ = false;
};

AffixIndex build_affix_index(const std::vector<Phrase>& phrases,
                             AffixIndexOptions options = {});

// Exhaustive-scan reference for is_connecting: same definition, executed by
// a linear scan over the phrase list.  Test oracle; keep independent of
// AffixIndex internals.
SplitWitness brute_force_is_connecting(const std::vector<Phrase>& phrases,
                                       const Phrase& phrase);

// Strongest applicable label: a before c/d before none.
ConnectCase classify_pair(const AffixIndex& src_index, const AffixIndex& tgt_index,
                          const PhrasePair& pair);

struct BilingualCandidate {
  PhrasePair pair;
  ConnectCase connect_case;
};

struct ExtractStats {
  std::uint64_t seen = 0;
  std::uint64_t connecting = 0;   // case != none
  std::uint64_t accepted = 0;
  std::uint64_t in_domain_duplicates = 0;
  std::uint64_t repeated_candidates = 0;  // same (src,tgt) seen again
};

// Exact (src, tgt) key set for duplicate suppression.
class PairKeySet {
 public:
  // Returns true when the pair was newly added.
  bool insert(const PhrasePair& pair);
  bool insert(const Phrase& src, const Phrase& tgt);
  bool contains(const Phrase& src, const Phrase& tgt) const;
  std::size_t size() const { return keys_.size(); }

 private:
  std::unordered_set<std::vector<TokenId>, PhraseHash> keys_;
};

// Streams the out-of-domain table and keeps pairs whose case is accepted by
// `policy`, excluding exact matches of the in-domain table and repeated
// (src, tgt) keys (first occurrence wins, so chained tools and the in-process
// pipeline agree byte-for-byte).  Input order is preserved.
std::vector<BilingualCandidate> extract_bilingual_candidates(
    TableReader& out_table, const AffixIndex& src_index, const AffixIndex& tgt_index,
    const PairKeySet& in_domain_keys, const CasePolicy& policy,
    ExtractStats* stats = nullptr);

// Explicit out-of-domain LM n-grams of order 2..max_order that connect on the
// target side and are not already explicit (non-placeholder) in the in-domain
// LM.  Emitted in canonical order with their out-of-domain conditional log10
// probability.
std::vector<std::pair<Phrase, double>> extract_monolingual_candidates(
    const NgramLm& out_lm, const NgramLm& in_lm, const AffixIndex& tgt_index,
    int max_order, const Vocab& vocab, ExtractStats* stats = nullptr);

}  // namespace phraseadapt

#endif  // PHRASEADAPT_CONNECTING_HPP_
