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

#include "phraseadapt/op_scoring.hpp"

#include <algorithm>

#include "phraseadapt/errors.hpp"
#include "phraseadapt/numeric.hpp"

namespace phraseadapt {

OpScorer::OpScorer(const AffixIndex& index, const NgramLm& lm) : index_(index) {
  pool_prob_.reserve(index.phrases().size());
  for (const Phrase& p : index.phrases())
    pool_prob_.push_back(pow10_floored(lm.sequence_logprob(p)));
}

double OpScorer::affix_occurrence_sum(std::span<const std::uint32_t> occurrences) const {
  KahanSum sum;
  for (std::uint32_t id : occurrences) sum.add(pool_prob_[id]);
  return sum.value();
}

OpScore OpScorer::occurring_probability(const Phrase& phrase) const {
  if (phrase.ids.size() < 2)
    throw InputError("occurring probability needs a phrase of length >= 2");
  OpScore score;
  std::span<const TokenId> ids(phrase.ids);
  KahanSum total;
  for (std::size_t k = 1; k < ids.size(); ++k) {
    double left = affix_occurrence_sum(index_.suffix_occurrences(ids.first(k)));
    if (left == 0.0) continue;
    double right = affix_occurrence_sum(index_.prefix_occurrences(ids.subspan(k)));
    if (right == 0.0) continue;
    total.add(left * right);
    score.terms.push_back({static_cast<int>(k), left, right});
  }
  score.value = total.value();
  return score;
}

OpScore occurring_probability(const Phrase& phrase, const AffixIndex& index,
                              const NgramLm& lm) {
  return OpScorer(index, lm).occurring_probability(phrase);
}

double pair_op_score(const PhrasePair& pair, const OpScorer& src_scorer,
                     const OpScorer& tgt_scorer) {
  if (pair.src.ids.size() < 2 || pair.tgt.ids.size() < 2) return 0.0;
  double src = src_scorer.occurring_probability(pair.src).value;
  if (src == 0.0) return 0.0;
  double tgt = tgt_scorer.occurring_probability(pair.tgt).value;
  return src * tgt;
}

double brute_force_occurring_probability(const Phrase& phrase,
                                         const std::vector<Phrase>& in_domain,
                                         const NgramLm& lm) {
  const std::vector<TokenId>& ids = phrase.ids;
  if (ids.size() < 2)
    throw InputError("occurring probability needs a phrase of length >= 2");
  double total = 0.0;
  for (std::size_t k = 1; k < ids.size(); ++k) {
    double left = 0.0;
    double right = 0.0;
    std::size_t rlen = ids.size() - k;
    for (const Phrase& p : in_domain) {
      if (p.ids.size() >= k && std::equal(ids.begin(), ids.begin() + k, p.ids.end() - k))
        left += pow10_floored(lm.sequence_logprob(p));
      if (p.ids.size() >= rlen && std::equal(ids.begin() + k, ids.end(), p.ids.begin()))
        right += pow10_floored(lm.sequence_logprob(p));
    }
    total += left * right;
  }
  return total;
}

std::vector<RankedCandidate> rank_candidates(
    std::span<const double> scores,
    std::span<const std::pair<std::string, std::string>> keys,
    const SelectPolicy& policy) {
  if (scores.size() != keys.size())
    throw InputError("rank_candidates: scores/keys size mismatch");
  std::vector<RankedCandidate> ranked(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    ranked[i].input_index = i;
    ranked[i].score = scores[i];
    ranked[i].sort_src = keys[i].first;
    ranked[i].sort_tgt = keys[i].second;
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedCandidate& a, const RankedCandidate& b) {
                     if (a.score != b.score) return a.score > b.score;
                     if (a.sort_src != b.sort_src) return a.sort_src < b.sort_src;
                     return a.sort_tgt < b.sort_tgt;
                   });
  if (policy.min_score.has_value()) {
    auto cut = std::find_if(ranked.begin(), ranked.end(), [&](const RankedCandidate& c) {
      return c.score < *policy.min_score;
    });
    ranked.erase(cut, ranked.end());
  }
  if (policy.top_k.has_value() && ranked.size() > *policy.top_k)
    ranked.resize(*policy.top_k);
  for (std::size_t i = 0; i < ranked.size(); ++i)
    ranked[i].rank = static_cast<std::uint32_t>(i) + 1;
  return ranked;
}

}  // namespace phraseadapt
