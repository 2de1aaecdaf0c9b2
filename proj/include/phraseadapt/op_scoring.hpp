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
// Occurring probability: for a candidate phrase, sum over splits k of
// (sum of in-domain LM probabilities of indexed phrases ending with the
// left part) x (sum over phrases starting with the right part).  Scores
// are linear-space with compensated summation.

#ifndef PHRASEADAPT_OP_SCORING_HPP_
#define PHRASEADAPT_OP_SCORING_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phraseadapt/connecting.hpp"
#include "phraseadapt/ngram_lm.hpp"

namespace phraseadapt {

struct OpScore {
  struct SplitTerm {
    int split = 0;
    double suffix_sum = 0.0;
    double prefix_sum = 0.0;
  };
  double value = 0.0;
  std::vector<SplitTerm> terms;  // diagnostics, one per split with both sides
};

// Caches in-domain phrase sequence probabilities for one (index, lm) pair.
// Immutable inputs; safe for concurrent scoring once constructed.
class OpScorer {
 public:
  OpScorer(const AffixIndex& index, const NgramLm& lm);

  // Sum of linear-space sequence probabilities over occurrence-list entries.
  double affix_occurrence_sum(std::span<const std::uint32_t> occurrences) const;

  // Throws InputError for phrases of length < 2 (no splits exist).
  OpScore occurring_probability(const Phrase& phrase) const;

 private:
  const AffixIndex& index_;
  std::vector<double> pool_prob_;  // 10^sequence_logprob per pool phrase
};

OpScore occurring_probability(const Phrase& phrase, const AffixIndex& index,
                              const NgramLm& lm);

// P_op(F) * P_op(E); sides shorter than 2 tokens contribute 0 (a length-1
// side has no split, so the pair is never selected by OP).
double pair_op_score(const PhrasePair& pair, const OpScorer& src_scorer,
                     const OpScorer& tgt_scorer);

// Reference implementation by direct nested loops over the full phrase list,
// no index and no occurrence cap.  Test oracle.
double brute_force_occurring_probability(const Phrase& phrase,
                                         const std::vector<Phrase>& in_domain,
                                         const NgramLm& lm);

struct RankedCandidate {
  std::size_t input_index = 0;  // position in the candidate stream
  double score = 0.0;
  std::uint32_t rank = 0;       // 1-based, assigned after sorting
  std::string sort_src;         // serialized source (or n-gram) text
  std::string sort_tgt;         // serialized target text; empty for n-grams
};

struct SelectPolicy {
  std::optional<std::uint64_t> top_k;
  std::optional<double> min_score;
};

// Stable sort by (score desc, source text asc, target text asc), then
// truncation per the policy.  `scores[i]` belongs to input item i whose sort
// keys are given by `keys[i]` = (src text, tgt text).
std::vector<RankedCandidate> rank_candidates(
    std::span<const double> scores,
    std::span<const std::pair<std::string, std::string>> keys,
    const SelectPolicy& policy);

}  // namespace phraseadapt

#endif  // PHRASEADAPT_OP_SCORING_HPP_
