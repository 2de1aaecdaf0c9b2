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

#include "phraseadapt/connecting.hpp"

#include <algorithm>

#include "phraseadapt/errors.hpp"

namespace phraseadapt {

CasePolicy CasePolicy::parse(std::string_view letters) {
  CasePolicy p{false, false, false};
  for (char c : letters) {
    switch (c) {
      case 'a': p.both = true; break;
      case 'b': p.both = p.source_only = p.target_only = true; break;
      case 'c': p.source_only = true; break;
      case 'd': p.target_only = true; break;
      case ',': case ' ': break;
      default:
        throw InputError(std::string("unknown connecting case '") + c +
                         "'; expected letters from {a,b,c,d}");
    }
  }
  if (!p.both && !p.source_only && !p.target_only)
    throw InputError("empty case policy");
  return p;
}

char case_letter(ConnectCase c) {
  switch (c) {
    case ConnectCase::kBoth: return 'a';
    case ConnectCase::kSourceOnly: return 'c';
    case ConnectCase::kTargetOnly: return 'd';
    case ConnectCase::kNone: return '-';
  }
  return '?';
}

AffixIndex::AffixIndex(AffixIndexOptions options) : options_(options) {
  if (options_.max_affix_len < 1) throw InputError("max_affix_len must be >= 1");
  if (options_.occurrence_cap < 1) throw InputError("occurrence_cap must be >= 1");
}

void AffixIndex::add_phrase(const Phrase& phrase) {
  if (finalized_) throw InputError("AffixIndex is frozen");
  if (phrase.ids.empty()) throw InputError("cannot index an empty phrase");
  auto [it, inserted] =
      pool_ids_.try_emplace(phrase.ids, static_cast<std::uint32_t>(pool_.size()));
  if (!inserted) return;  // duplicate phrase: affixes already indexed
  std::uint32_t id = it->second;
  pool_.push_back(phrase);

  std::size_t max_len =
      std::min(phrase.ids.size(), static_cast<std::size_t>(options_.max_affix_len));
  std::vector<TokenId> prefix, suffix;
  prefix.reserve(max_len);
  suffix.reserve(max_len);
  for (std::size_t len = 1; len <= max_len; ++len) {
    prefix.push_back(phrase.ids[len - 1]);
    prefix_[prefix].ids.push_back(id);
    // suffix keys are reversed so both maps share one layout
    suffix.push_back(phrase.ids[phrase.ids.size() - len]);
    suffix_[suffix].ids.push_back(id);
  }
}

void AffixIndex::finalize() {
  if (finalized_) return;
  finalized_ = true;
  // Rank pool phrases lexicographically by token-id sequence so capped lists
  // keep a deterministic, input-order-independent subset.
  std::vector<std::uint32_t> rank(pool_.size());
  {
    std::vector<std::uint32_t> by_lex(pool_.size());
    for (std::uint32_t i = 0; i < by_lex.size(); ++i) by_lex[i] = i;
    std::sort(by_lex.begin(), by_lex.end(), [&](std::uint32_t a, std::uint32_t b) {
      return pool_[a].ids < pool_[b].ids;
    });
    for (std::uint32_t r = 0; r < by_lex.size(); ++r) rank[by_lex[r]] = r;
  }
  auto finish = [&](AffixMap& map) {
    for (auto& [key, occ] : map) {
      std::sort(occ.ids.begin(), occ.ids.end(), [&](std::uint32_t a, std::uint32_t b) {
        return rank[a] < rank[b];
      });
      occ.ids.erase(std::unique(occ.ids.begin(), occ.ids.end()), occ.ids.end());
      if (occ.ids.size() > options_.occurrence_cap) {
        occ.ids.resize(options_.occurrence_cap);
        ++overflowed_;
      }
    }
  };
  finish(prefix_);
  finish(suffix_);
}

std::span<const std::uint32_t> AffixIndex::prefix_occurrences(
    std::span<const TokenId> affix) const {
  thread_local std::vector<TokenId> key;
  key.assign(affix.begin(), affix.end());
  auto it = prefix_.find(key);
  if (it == prefix_.end()) return {};
  return it->second.ids;
}

std::span<const std::uint32_t> AffixIndex::suffix_occurrences(
    std::span<const TokenId> affix) const {
  thread_local std::vector<TokenId> key;
  key.assign(affix.rbegin(), affix.rend());
  auto it = suffix_.find(key);
  if (it == suffix_.end()) return {};
  return it->second.ids;
}

SplitWitness AffixIndex::is_connecting(const Phrase& phrase) const {
  SplitWitness witness;
  std::span<const TokenId> ids(phrase.ids);
  if (ids.size() < 2) return witness;
  for (std::size_t k = 1; k < ids.size(); ++k) {
    if (suffix_occurrences(ids.first(k)).empty()) continue;
    if (prefix_occurrences(ids.subspan(k)).empty()) continue;
    witness.splits.push_back(static_cast<int>(k));
  }
  return witness;
}

AffixIndex build_affix_index(const std::vector<Phrase>& phrases,
                             AffixIndexOptions options) {
  AffixIndex index(options);
  for (const Phrase& p : phrases) index.add_phrase(p);
  index.finalize();
  return index;
}

SplitWitness brute_force_is_connecting(const std::vector<Phrase>& phrases,
                                       const Phrase& phrase) {
  SplitWitness witness;
  const std::vector<TokenId>& ids = phrase.ids;
  if (ids.size() < 2) return witness;
  for (std::size_t k = 1; k < ids.size(); ++k) {
    bool left_ok = false;
    bool right_ok = false;
    for (const Phrase& p : phrases) {
      if (!left_ok && p.ids.size() >= k &&
          std::equal(ids.begin(), ids.begin() + k, p.ids.end() - k))
        left_ok = true;
      std::size_t rlen = ids.size() - k;
      if (!right_ok && p.ids.size() >= rlen &&
          std::equal(ids.begin() + k, ids.end(), p.ids.begin()))
        right_ok = true;
      if (left_ok && right_ok) break;
    }
    if (left_ok && right_ok) witness.splits.push_back(static_cast<int>(k));
  }
  return witness;
}

ConnectCase classify_pair(const AffixIndex& src_index, const AffixIndex& tgt_index,
                          const PhrasePair& pair) {
  bool src = src_index.is_connecting(pair.src).connecting();
  bool tgt = tgt_index.is_connecting(pair.tgt).connecting();
  if (src && tgt) return ConnectCase::kBoth;
  if (src) return ConnectCase::kSourceOnly;
  if (tgt) return ConnectCase::kTargetOnly;
  return ConnectCase::kNone;
}

namespace {

std::vector<TokenId> pair_key(const Phrase& src, const Phrase& tgt) {
  std::vector<TokenId> key;
  key.reserve(src.ids.size() + tgt.ids.size() + 1);
  key.insert(key.end(), src.ids.begin(), src.ids.end());
  key.push_back(-1);  // never a token id
  key.insert(key.end(), tgt.ids.begin(), tgt.ids.end());
  return key;
}

}  // namespace

bool PairKeySet::insert(const PhrasePair& pair) { return insert(pair.src, pair.tgt); }

bool PairKeySet::insert(const Phrase& src, const Phrase& tgt) {
  return keys_.insert(pair_key(src, tgt)).second;
}

bool PairKeySet::contains(const Phrase& src, const Phrase& tgt) const {
  return keys_.find(pair_key(src, tgt)) != keys_.end();
}

std::vector<BilingualCandidate> extract_bilingual_candidates(
    TableReader& out_table, const AffixIndex& src_index, const AffixIndex& tgt_index,
    const PairKeySet& in_domain_keys, const CasePolicy& policy, ExtractStats* stats) {
  std::vector<BilingualCandidate> candidates;
  PairKeySet emitted;
  ExtractStats local;
  PhrasePair pair;
  while (out_table.next(&pair)) {
    ++local.seen;
    ConnectCase c = classify_pair(src_index, tgt_index, pair);
    if (c != ConnectCase::kNone) ++local.connecting;
    if (!policy.accepts(c)) continue;
    if (in_domain_keys.contains(pair.src, pair.tgt)) {
      ++local.in_domain_duplicates;
      continue;
    }
    if (!emitted.insert(pair)) {
      ++local.repeated_candidates;
      continue;
    }
    ++local.accepted;
    candidates.push_back(BilingualCandidate{std::move(pair), c});
    pair = PhrasePair{};
  }
  if (stats != nullptr) *stats = local;
  return candidates;
}

std::vector<std::pair<Phrase, double>> extract_monolingual_candidates(
    const NgramLm& out_lm, const NgramLm& in_lm, const AffixIndex& tgt_index,
    int max_order, const Vocab& vocab, ExtractStats* stats) {
  if (max_order > out_lm.order())
    throw InputError("max_order " + std::to_string(max_order) +
                     " exceeds out-of-domain LM order " +
                     std::to_string(out_lm.order()));
  std::vector<std::pair<Phrase, double>> out;
  ExtractStats local;
  // Unigrams are skipped: a length-1 phrase has no split and cannot connect.
  for (int n = 2; n <= max_order; ++n) {
    out_lm.for_each_sorted(vocab, n, [&](std::span<const TokenId> ngram,
                                         const NgramEntry& e) {
      if (e.placeholder) return;  // context shells carry no probability
      ++local.seen;
      Phrase phrase{std::vector<TokenId>(ngram.begin(), ngram.end())};
      if (!tgt_index.is_connecting(phrase).connecting()) return;
      ++local.connecting;
      const NgramEntry* existing = in_lm.find(ngram);
      if (existing != nullptr && !existing->placeholder) {
        ++local.in_domain_duplicates;
        return;
      }
      ++local.accepted;
      out.emplace_back(std::move(phrase), e.logprob);
    });
  }
  if (stats != nullptr) *stats = local;
  return out;
}

}  // namespace phraseadapt
