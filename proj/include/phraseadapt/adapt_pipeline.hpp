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
// End-to-end adaptation stages.  Each stage reads and writes files, so the
// `pipeline` driver and the per-stage CLI subcommands share one code path
// and produce byte-identical outputs.  Intermediate formats:
//   bilingual candidates  case \t src \t tgt
//   monolingual candidates  logprob \t ngram
//   ranked (bilingual)    score \t src \t tgt
//   ranked (monolingual)  score \t ngram

#ifndef PHRASEADAPT_ADAPT_PIPELINE_HPP_
#define PHRASEADAPT_ADAPT_PIPELINE_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "phraseadapt/connecting.hpp"
#include "phraseadapt/ngram_lm.hpp"
#include "phraseadapt/nn_model.hpp"
#include "phraseadapt/op_scoring.hpp"
#include "phraseadapt/phrase_table.hpp"

namespace phraseadapt {

// Penalty feature appended as the last score column: 1 for in-domain
// entries, e for adapted out-of-domain entries (decoder weighting is
// external).  Values are rendered with 6 significant digits.
struct PenaltyPolicy {
  double in_domain = 1.0;
  double out_of_domain = 2.718281828459045;
  std::string in_domain_text = "1";
  std::string out_of_domain_text = "2.71828";
};

enum class RankMethod { kOp, kNn, kNone };
enum class CandidateScope { kConnecting, kAll };  // kAll = direct adaptation

RankMethod parse_rank_method(std::string_view name);
CandidateScope parse_scope(std::string_view name);

// --- library-level operations ----------------------------------------------

struct MergePtStats {
  std::uint64_t in_entries = 0;
  std::uint64_t selected = 0;
  std::uint64_t added = 0;
  std::uint64_t duplicates_dropped = 0;  // selected pairs shadowed in-domain
};

// Appends the penalty feature and merges `selected` into the in-domain
// table.  In-domain wins on duplicate (src, tgt); output is fully sorted by
// (source text, target text).  Returns finished lines without newlines.
std::vector<std::string> merge_phrase_tables(TableReader& in_pt,
                                             std::vector<PhrasePair> selected,
                                             const PenaltyPolicy& policy,
                                             const Vocab& vocab,
                                             MergePtStats* stats = nullptr);

struct MergeReoStats {
  std::uint64_t in_entries = 0;
  std::uint64_t added = 0;
  std::uint64_t missing = 0;  // selected pairs absent from the out table
};

// Keeps all in-domain reordering entries plus out-of-domain entries whose
// (src, tgt) was selected; orientation probabilities pass through verbatim.
std::vector<std::string> select_reordering_entries(
    LineSource& in_reo, LineSource& out_reo,
    const std::vector<std::pair<std::string, std::string>>& selected_keys,
    MergeReoStats* stats = nullptr);

// insert_ngrams + renormalize on a copy of the in-domain LM.
NgramLm augment_lm(const NgramLm& in_lm,
                   const std::vector<std::pair<Phrase, double>>& selected,
                   const Vocab& vocab);

// Appends Q_in(E|F) (12 significant digits) after the existing columns of
// every entry; order is preserved.
void attach_qin_feature(LineSource& pt, const NnModel& model_in, Vocab& vocab,
                        std::ostream& out, std::uint64_t* entries = nullptr);

// log10( lambda * P_lm(phrase) + (1 - lambda) * Q_in(phrase)^len ): linear
// interpolation in probability space, with the geometric-mean NN score
// re-expanded to a sequence probability.
double interpolate_lm_qin(const NgramLm& lm, const NnModel& model_in,
                          const Vocab& vocab, double lambda, const Phrase& query);

// --- file-level stages ------------------------------------------------------

struct StageTimings {
  double extract_ms = 0.0;
  double rank_ms = 0.0;
  double merge_pt_ms = 0.0;
  double merge_lm_ms = 0.0;
  double merge_reo_ms = 0.0;
};

struct ExtractOptions {
  std::string in_pt;
  std::string out_pt;                // optional: bilingual extraction
  std::string in_lm_tgt;             // optional: monolingual exclusion LM
  std::string out_lm;                // optional: monolingual source LM
  std::string bilingual_out;
  std::string monolingual_out;
  CasePolicy policy;                 // default: case a only
  CandidateScope scope = CandidateScope::kConnecting;
  AffixIndexOptions affix;
  int mono_max_order = 0;            // 0 = out-LM order
  bool lenient = false;
};

struct ExtractReport {
  ExtractStats bilingual;
  ExtractStats monolingual;
  TableStats in_pt_stats;
  TableStats out_pt_stats;
  double classify_entries_per_sec = 0.0;
  double parse_mb_per_min = 0.0;
  double elapsed_ms = 0.0;
};

ExtractReport run_extract(const ExtractOptions& options);

struct RankOptions {
  RankMethod method = RankMethod::kOp;
  std::string in_pt;          // rebuilds affix indexes (OP)
  std::string in_lm_src;      // OP bilingual
  std::string in_lm_tgt;      // OP bilingual + monolingual
  std::string bilingual_candidates;
  std::string monolingual_candidates;
  std::string ranked_bilingual_out;
  std::string ranked_monolingual_out;
  std::string nn_tm_in, nn_tm_out;  // NN bilingual
  std::string nn_lm_in, nn_lm_out;  // NN monolingual
  SelectPolicy select;
  AffixIndexOptions affix;
  int threads = 1;
  bool lenient = false;
};

struct RankReport {
  std::uint64_t bilingual_candidates = 0;
  std::uint64_t bilingual_selected = 0;
  std::uint64_t monolingual_candidates = 0;
  std::uint64_t monolingual_selected = 0;
  double elapsed_ms = 0.0;
};

RankReport run_rank(const RankOptions& options);

struct MergePtOptions {
  std::string in_pt;
  std::string out_pt;
  std::string selected;  // ranked bilingual TSV
  std::string merged_out;
  PenaltyPolicy penalty;
  bool lenient = false;
};

struct MergePtReport {
  MergePtStats stats;
  std::uint64_t output_entries = 0;
  std::uint64_t selected_missing_in_out_pt = 0;
  double elapsed_ms = 0.0;
};

MergePtReport run_merge_pt(const MergePtOptions& options);

struct MergeLmOptions {
  std::string in_lm;
  std::string out_lm;
  std::string selected;  // ranked monolingual TSV
  std::string merged_out;
};

struct MergeLmReport {
  std::uint64_t inserted = 0;
  std::uint64_t missing_in_out_lm = 0;
  std::uint64_t output_ngrams = 0;
  double elapsed_ms = 0.0;
};

MergeLmReport run_merge_lm(const MergeLmOptions& options);

struct MergeReoOptions {
  std::string in_reo;
  std::string out_reo;
  std::string selected;  // ranked bilingual TSV
  std::string merged_out;
};

struct MergeReoReport {
  MergeReoStats stats;
  double elapsed_ms = 0.0;
};

MergeReoReport run_merge_reo(const MergeReoOptions& options);

struct QinFeatureOptions {
  std::string pt;
  std::string model;  // trained translation net
  std::string out;
};

std::uint64_t run_qin_feature(const QinFeatureOptions& options);

// --- whole pipeline ---------------------------------------------------------

struct PipelineOptions {
  std::string in_pt;
  std::string out_pt;
  std::string in_lm_src;
  std::string in_lm_tgt;
  std::string out_lm;
  std::string in_reo;
  std::string out_reo;
  std::string merged_pt;   // required
  std::string merged_lm;   // with out_lm/in_lm_tgt
  std::string merged_reo;  // with reordering inputs
  // Intermediate TSVs; default next to merged_pt when empty.
  std::string bilingual_candidates, monolingual_candidates;
  std::string ranked_bilingual, ranked_monolingual;
  RankMethod method = RankMethod::kOp;
  CandidateScope scope = CandidateScope::kConnecting;
  CasePolicy policy;
  SelectPolicy select;
  AffixIndexOptions affix;
  PenaltyPolicy penalty;
  std::string nn_tm_in, nn_tm_out, nn_lm_in, nn_lm_out;
  int mono_max_order = 0;
  int threads = 1;
  bool lenient = false;
};

struct AdaptReport {
  ExtractReport extract;
  RankReport rank;
  MergePtReport merge_pt;
  MergeLmReport merge_lm;
  MergeReoReport merge_reo;
  bool merged_lm_written = false;
  bool merged_reo_written = false;
  nlohmann::json to_json(const PipelineOptions& options) const;
};

AdaptReport run_pipeline(const PipelineOptions& options);

}  // namespace phraseadapt

#endif  // PHRASEADAPT_ADAPT_PIPELINE_HPP_
