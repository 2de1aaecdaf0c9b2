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
// phrase-adapt: command-line driver for connecting-phrase adaptation of
// phrase tables, reordering tables and back-off language models.
//
// Exit codes: 0 success, 1 configuration error, 2 input format / I/O error,
// 3 numerical or normalization error.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <nlohmann/json.hpp>

#include "phraseadapt/adapt_pipeline.hpp"
#include "phraseadapt/errors.hpp"
#include "phraseadapt/nn_train.hpp"

namespace pa = phraseadapt;

namespace {

// Machine-readable progress: one JSON object per line on stderr.
void progress(const std::string& stage, nlohmann::json details) {
  details["event"] = "stage";
  details["stage"] = stage;
  std::cerr << details.dump() << "\n";
}

void write_report(const std::string& path, const nlohmann::json& j) {
  if (path.empty()) return;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw pa::IoError("cannot open report path " + path);
  out << j.dump(2) << "\n";
}

struct CommonArgs {
  std::string report;
  bool lenient = false;
  int threads = 1;
};

void add_common(CLI::App* sub, CommonArgs& args, bool with_threads) {
  sub->add_option("--report", args.report, "Write a JSON report to this path");
  sub->add_flag("--lenient", args.lenient,
                "Skip malformed table lines instead of failing");
  if (with_threads)
    sub->add_option("--threads", args.threads, "Worker threads (1 = serial)")
        ->envname("PHRASE_ADAPT_THREADS")
        ->check(CLI::PositiveNumber);
}

nlohmann::json rank_report_json(const pa::RankReport& r) {
  return {{"bilingual_candidates", r.bilingual_candidates},
          {"bilingual_selected", r.bilingual_selected},
          {"monolingual_candidates", r.monolingual_candidates},
          {"monolingual_selected", r.monolingual_selected}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"connecting-phrase domain adaptation for phrase-based MT assets"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a key=value config file");
  app.set_version_flag("--version", "phrase-adapt 0.1.0");

  // --- stats -----------------------------------------------------------
  {
    auto* sub = app.add_subcommand("stats", "Phrase-table size statistics");
    auto args = std::make_shared<CommonArgs>();
    auto in_pt = std::make_shared<std::string>();
    sub->add_option("--in-pt", *in_pt, "Phrase table (Moses format, may be .gz)")
        ->required();
    add_common(sub, *args, false);
    sub->callback([=]() {
      pa::Vocab vocab;
      pa::FileLineSource lines(*in_pt);
      pa::TableReader reader(lines, vocab,
                             args->lenient ? pa::ParseMode::kLenient
                                           : pa::ParseMode::kStrict);
      pa::PhrasePair pair;
      while (reader.next(&pair)) {
      }
      const pa::TableStats& s = reader.stats();
      nlohmann::json j{{"entries", s.entries},
                       {"max_src_len", s.max_src_len},
                       {"max_tgt_len", s.max_tgt_len},
                       {"distinct_sources", s.distinct_sources},
                       {"malformed_skipped", s.malformed_skipped}};
      std::cout << j.dump(2) << "\n";
      write_report(args->report, j);
    });
  }

  // --- index -----------------------------------------------------------
  {
    auto* sub = app.add_subcommand("index", "Build affix indexes and report sizes");
    auto args = std::make_shared<CommonArgs>();
    auto in_pt = std::make_shared<std::string>();
    auto affix = std::make_shared<pa::AffixIndexOptions>();
    sub->add_option("--in-pt", *in_pt, "In-domain phrase table")->required();
    sub->add_option("--max-affix-len", affix->max_affix_len, "Max indexed affix length")
        ->check(CLI::PositiveNumber);
    sub->add_option("--occurrence-cap", affix->occurrence_cap,
                    "Per-affix occurrence list cap")
        ->check(CLI::PositiveNumber);
    add_common(sub, *args, false);
    sub->callback([=]() {
      pa::Vocab vocab;
      pa::FileLineSource lines(*in_pt);
      pa::TableReader reader(lines, vocab,
                             args->lenient ? pa::ParseMode::kLenient
                                           : pa::ParseMode::kStrict);
      std::vector<pa::Phrase> src, tgt;
      pa::PhrasePair pair;
      while (reader.next(&pair)) {
        src.push_back(std::move(pair.src));
        tgt.push_back(std::move(pair.tgt));
      }
      pa::AffixIndex src_index = pa::build_affix_index(src, *affix);
      pa::AffixIndex tgt_index = pa::build_affix_index(tgt, *affix);
      nlohmann::json j{
          {"entries", reader.stats().entries},
          {"source", {{"phrases", src_index.phrases().size()},
                      {"affix_entries", src_index.affix_entries()},
                      {"overflowed_affixes", src_index.overflowed_affixes()}}},
          {"target", {{"phrases", tgt_index.phrases().size()},
                      {"affix_entries", tgt_index.affix_entries()},
                      {"overflowed_affixes", tgt_index.overflowed_affixes()}}}};
      std::cout << j.dump(2) << "\n";
      write_report(args->report, j);
    });
  }

  // --- extract ----------------------------------------------------------
  {
    auto* sub = app.add_subcommand(
        "extract", "Extract connecting candidates from out-of-domain assets");
    auto args = std::make_shared<CommonArgs>();
    auto opts = std::make_shared<pa::ExtractOptions>();
    auto case_letters = std::make_shared<std::string>("a");
    auto scope = std::make_shared<std::string>("connect");
    sub->add_option("--in-pt", opts->in_pt, "In-domain phrase table")->required();
    sub->add_option("--out-pt", opts->out_pt, "Out-of-domain phrase table");
    sub->add_option("--in-lm-tgt", opts->in_lm_tgt, "In-domain target LM (ARPA)");
    sub->add_option("--out-lm", opts->out_lm, "Out-of-domain LM (ARPA)");
    sub->add_option("--bilingual-out", opts->bilingual_out,
                    "Candidate pairs TSV: case\\tsrc\\ttgt");
    sub->add_option("--monolingual-out", opts->monolingual_out,
                    "Candidate n-grams TSV: logprob\\tngram");
    sub->add_option("--case", *case_letters,
                    "Accepted connecting cases (letters from a,b,c,d)");
    sub->add_option("--scope", *scope, "connect = connecting only, all = every entry");
    sub->add_option("--max-affix-len", opts->affix.max_affix_len, "Affix length limit")
        ->check(CLI::PositiveNumber);
    sub->add_option("--occurrence-cap", opts->affix.occurrence_cap,
                    "Per-affix occurrence list cap")
        ->check(CLI::PositiveNumber);
    sub->add_option("--max-order", opts->mono_max_order,
                    "Max n-gram order for monolingual candidates (0 = LM order)");
    add_common(sub, *args, false);
    sub->callback([=]() {
      opts->policy = pa::CasePolicy::parse(*case_letters);
      opts->scope = pa::parse_scope(*scope);
      opts->lenient = args->lenient;
      if (opts->bilingual_out.empty() && opts->monolingual_out.empty())
        throw pa::InputError("extract needs --bilingual-out and/or --monolingual-out");
      pa::ExtractReport report = pa::run_extract(*opts);
      progress("extract", {{"bilingual_accepted", report.bilingual.accepted},
                           {"monolingual_accepted", report.monolingual.accepted},
                           {"ms", report.elapsed_ms}});
      nlohmann::json j{
          {"bilingual",
           {{"seen", report.bilingual.seen},
            {"connecting", report.bilingual.connecting},
            {"accepted", report.bilingual.accepted},
            {"in_domain_duplicates", report.bilingual.in_domain_duplicates}}},
          {"monolingual",
           {{"seen", report.monolingual.seen},
            {"connecting", report.monolingual.connecting},
            {"accepted", report.monolingual.accepted},
            {"in_domain_duplicates", report.monolingual.in_domain_duplicates}}},
          {"throughput",
           {{"classify_entries_per_sec", report.classify_entries_per_sec},
            {"parse_mb_per_min", report.parse_mb_per_min}}}};
      write_report(args->report, j);
    });
  }

  // --- rank-op / rank-nn --------------------------------------------------
  auto add_rank = [&](const char* name, const char* help, pa::RankMethod method) {
    auto* sub = app.add_subcommand(name, help);
    auto args = std::make_shared<CommonArgs>();
    auto opts = std::make_shared<pa::RankOptions>();
    auto top_k = std::make_shared<std::int64_t>(-1);
    auto min_score = std::make_shared<double>();
    auto* min_opt = sub->add_option("--min-score", *min_score,
                                    "Keep candidates with score >= this");
    sub->add_option("--top-k", *top_k, "Keep the k best candidates")
        ->excludes(min_opt);
    sub->add_option("--bilingual", opts->bilingual_candidates,
                    "Bilingual candidates TSV from extract");
    sub->add_option("--monolingual", opts->monolingual_candidates,
                    "Monolingual candidates TSV from extract");
    sub->add_option("--ranked-out", opts->ranked_bilingual_out,
                    "Ranked pairs TSV: score\\tsrc\\ttgt");
    sub->add_option("--ranked-mono-out", opts->ranked_monolingual_out,
                    "Ranked n-grams TSV: score\\tngram");
    if (method == pa::RankMethod::kOp) {
      sub->add_option("--in-pt", opts->in_pt, "In-domain phrase table")->required();
      sub->add_option("--in-lm-src", opts->in_lm_src, "In-domain source LM (ARPA)");
      sub->add_option("--in-lm-tgt", opts->in_lm_tgt, "In-domain target LM (ARPA)");
      sub->add_option("--max-affix-len", opts->affix.max_affix_len,
                      "Affix length limit")
          ->check(CLI::PositiveNumber);
      sub->add_option("--occurrence-cap", opts->affix.occurrence_cap,
                      "Per-affix occurrence list cap")
          ->check(CLI::PositiveNumber);
    } else {
      sub->add_option("--nn-tm-in", opts->nn_tm_in, "In-domain translation net");
      sub->add_option("--nn-tm-out", opts->nn_tm_out, "Out-of-domain translation net");
      sub->add_option("--nn-lm-in", opts->nn_lm_in, "In-domain LM net");
      sub->add_option("--nn-lm-out", opts->nn_lm_out, "Out-of-domain LM net");
    }
    add_common(sub, *args, true);
    sub->callback([=]() {
      opts->method = method;
      opts->threads = args->threads;
      opts->lenient = args->lenient;
      if (*top_k >= 0) opts->select.top_k = static_cast<std::uint64_t>(*top_k);
      if (min_opt->count() > 0) opts->select.min_score = *min_score;
      if (opts->ranked_bilingual_out.empty() && opts->ranked_monolingual_out.empty())
        throw pa::InputError("rank needs --ranked-out and/or --ranked-mono-out");
      pa::RankReport report = pa::run_rank(*opts);
      progress(sub->get_name(), {{"bilingual_selected", report.bilingual_selected},
                                 {"monolingual_selected", report.monolingual_selected},
                                 {"ms", report.elapsed_ms}});
      write_report(args->report, rank_report_json(report));
    });
  };
  add_rank("rank-op", "Rank candidates by occurring probability", pa::RankMethod::kOp);
  add_rank("rank-nn", "Rank candidates by neural score difference", pa::RankMethod::kNn);

  // --- train-nn ----------------------------------------------------------
  {
    auto* sub = app.add_subcommand("train-nn", "Train a feed-forward scorer");
    auto args = std::make_shared<CommonArgs>();
    auto kind_name = std::make_shared<std::string>("tm");
    auto data = std::make_shared<std::string>();
    auto vocab_data = std::make_shared<std::string>();
    auto model_out = std::make_shared<std::string>();
    auto config = std::make_shared<pa::NnConfig>();
    sub->add_option("--nn-kind", *kind_name, "tm (translation) or lm (language model)")
        ->check(CLI::IsMember({"tm", "lm"}));
    sub->add_option("--data", *data,
                    "Training data: phrase table (tm) or one-sentence-per-line corpus (lm)")
        ->required();
    sub->add_option("--vocab-data", *vocab_data,
                    "Vocabulary source (default: --data; use the in-domain data "
                    "when training the out-of-domain net)");
    sub->add_option("--model-out", *model_out, "Output model container")->required();
    sub->add_option("--window", config->window, "Input window (source words)");
    sub->add_option("--proj-dim", config->proj_dim, "Projection dimension per word");
    sub->add_option("--hidden-dim", config->hidden_dim, "Hidden layer dimension");
    sub->add_option("--epochs", config->epochs, "Training epochs");
    sub->add_option("--batch-size", config->batch_size, "Minibatch size");
    sub->add_option("--learning-rate", config->learning_rate, "SGD learning rate");
    sub->add_option("--resample", config->resample_rate,
                    "Keep-rate for training units (paper-style subsampling)");
    sub->add_option("--seed", config->seed, "RNG seed");
    add_common(sub, *args, false);
    sub->callback([=]() {
      config->validate();
      pa::NnKind kind =
          *kind_name == "tm" ? pa::NnKind::kTranslation : pa::NnKind::kLanguageModel;
      std::string vocab_path = vocab_data->empty() ? *data : *vocab_data;
      pa::NnModel model;
      if (kind == pa::NnKind::kTranslation) {
        pa::FileLineSource vocab_lines(vocab_path);
        pa::PtVocabLists lists = pa::collect_pt_vocab(vocab_lines);
        model = pa::NnModel::init(kind, *config, std::move(lists.source),
                                  std::move(lists.target));
      } else {
        pa::FileLineSource vocab_lines(vocab_path);
        std::vector<std::string> tokens = pa::collect_corpus_vocab(vocab_lines);
        model = pa::NnModel::init(kind, *config, tokens, tokens);
      }
      std::vector<pa::NnExample> examples;
      {
        pa::FileLineSource data_lines(*data);
        examples = kind == pa::NnKind::kTranslation
                       ? pa::translation_examples_from_table(model, data_lines)
                       : pa::lm_examples_from_corpus(model, data_lines);
      }
      if (examples.empty()) throw pa::InputError("no training examples in " + *data);
      pa::TrainResult result = pa::train(model, examples);
      model.save(*model_out);
      nlohmann::json j{{"examples", examples.size()},
                       {"input_vocab", model.input_vocab()},
                       {"output_vocab", model.output_vocab()},
                       {"parameters", model.parameter_count()},
                       {"epoch_loss", result.epoch_loss}};
      progress("train-nn", {{"examples", examples.size()},
                            {"final_loss", result.epoch_loss.empty()
                                               ? nlohmann::json(nullptr)
                                               : nlohmann::json(result.epoch_loss.back())}});
      write_report(args->report, j);
    });
  }

  // --- merge-pt ------------------------------------------------------------
  {
    auto* sub = app.add_subcommand("merge-pt",
                                   "Merge selected pairs into the in-domain table "
                                   "with the penalty feature");
    auto args = std::make_shared<CommonArgs>();
    auto opts = std::make_shared<pa::MergePtOptions>();
    sub->add_option("--in-pt", opts->in_pt, "In-domain phrase table")->required();
    sub->add_option("--out-pt", opts->out_pt, "Out-of-domain phrase table");
    sub->add_option("--selected", opts->selected, "Ranked pairs TSV");
    sub->add_option("--merged-out", opts->merged_out, "Merged table path")->required();
    add_common(sub, *args, false);
    sub->callback([=]() {
      opts->lenient = args->lenient;
      pa::MergePtReport report = pa::run_merge_pt(*opts);
      progress("merge-pt", {{"added", report.stats.added},
                            {"duplicates_dropped", report.stats.duplicates_dropped},
                            {"output_entries", report.output_entries},
                            {"ms", report.elapsed_ms}});
      write_report(args->report,
                   {{"in_entries", report.stats.in_entries},
                    {"selected", report.stats.selected},
                    {"added", report.stats.added},
                    {"duplicates_dropped", report.stats.duplicates_dropped},
                    {"selected_missing_in_out_pt", report.selected_missing_in_out_pt},
                    {"output_entries", report.output_entries}});
    });
  }

  // --- merge-lm -------------------------------------------------------------
  {
    auto* sub = app.add_subcommand(
        "merge-lm", "Insert selected n-grams into the in-domain LM and renormalize");
    auto args = std::make_shared<CommonArgs>();
    auto opts = std::make_shared<pa::MergeLmOptions>();
    sub->add_option("--in-lm", opts->in_lm, "In-domain LM (ARPA)")->required();
    sub->add_option("--out-lm", opts->out_lm, "Out-of-domain LM (ARPA)");
    sub->add_option("--selected", opts->selected, "Ranked n-grams TSV");
    sub->add_option("--merged-out", opts->merged_out, "Merged ARPA path")->required();
    add_common(sub, *args, false);
    sub->callback([=]() {
      pa::MergeLmReport report = pa::run_merge_lm(*opts);
      progress("merge-lm", {{"inserted", report.inserted},
                            {"missing_in_out_lm", report.missing_in_out_lm},
                            {"output_ngrams", report.output_ngrams},
                            {"ms", report.elapsed_ms}});
      write_report(args->report, {{"inserted", report.inserted},
                                  {"missing_in_out_lm", report.missing_in_out_lm},
                                  {"output_ngrams", report.output_ngrams}});
    });
  }

  // --- merge-reo --------------------------------------------------------------
  {
    auto* sub = app.add_subcommand(
        "merge-reo", "Select reordering entries mirroring the phrase-table merge");
    auto args = std::make_shared<CommonArgs>();
    auto opts = std::make_shared<pa::MergeReoOptions>();
    sub->add_option("--reordering", opts->in_reo, "In-domain reordering table")
        ->required();
    sub->add_option("--out-reordering", opts->out_reo, "Out-of-domain reordering table")
        ->required();
    sub->add_option("--selected", opts->selected, "Ranked pairs TSV");
    sub->add_option("--merged-out", opts->merged_out, "Merged table path")->required();
    add_common(sub, *args, false);
    sub->callback([=]() {
      pa::MergeReoReport report = pa::run_merge_reo(*opts);
      progress("merge-reo", {{"added", report.stats.added},
                             {"missing", report.stats.missing},
                             {"ms", report.elapsed_ms}});
      write_report(args->report, {{"in_entries", report.stats.in_entries},
                                  {"added", report.stats.added},
                                  {"missing", report.stats.missing}});
    });
  }

  // --- qin-feature -------------------------------------------------------------
  {
    auto* sub = app.add_subcommand(
        "qin-feature", "Append the in-domain NN score as an extra feature column");
    auto args = std::make_shared<CommonArgs>();
    auto opts = std::make_shared<pa::QinFeatureOptions>();
    sub->add_option("--pt", opts->pt, "Phrase table to annotate")->required();
    sub->add_option("--nn-tm-in", opts->model, "In-domain translation net")->required();
    sub->add_option("--annotated-out", opts->out, "Output table path")->required();
    add_common(sub, *args, false);
    sub->callback([=]() {
      std::uint64_t entries = pa::run_qin_feature(*opts);
      progress("qin-feature", {{"entries", entries}});
      write_report(args->report, {{"entries", entries}});
    });
  }

  // --- pipeline -------------------------------------------------------------
  {
    auto* sub = app.add_subcommand("pipeline", "Run every stage in sequence");
    auto args = std::make_shared<CommonArgs>();
    auto opts = std::make_shared<pa::PipelineOptions>();
    auto case_letters = std::make_shared<std::string>("a");
    auto scope = std::make_shared<std::string>("connect");
    auto method = std::make_shared<std::string>("op");
    auto top_k = std::make_shared<std::int64_t>(-1);
    auto min_score = std::make_shared<double>();
    sub->add_option("--in-pt", opts->in_pt, "In-domain phrase table")->required();
    sub->add_option("--out-pt", opts->out_pt, "Out-of-domain phrase table");
    sub->add_option("--in-lm-src", opts->in_lm_src, "In-domain source LM (ARPA)");
    sub->add_option("--in-lm-tgt", opts->in_lm_tgt, "In-domain target LM (ARPA)");
    sub->add_option("--out-lm", opts->out_lm, "Out-of-domain LM (ARPA)");
    sub->add_option("--reordering", opts->in_reo, "In-domain reordering table");
    sub->add_option("--out-reordering", opts->out_reo, "Out-of-domain reordering table");
    sub->add_option("--merged-pt", opts->merged_pt, "Merged phrase table")->required();
    sub->add_option("--merged-lm", opts->merged_lm, "Merged ARPA LM");
    sub->add_option("--merged-reo", opts->merged_reo, "Merged reordering table");
    sub->add_option("--case", *case_letters, "Accepted connecting cases");
    sub->add_option("--method", *method, "Ranking method: op, nn or none");
    sub->add_option("--scope", *scope, "connect or all (direct adaptation)");
    auto* min_opt =
        sub->add_option("--min-score", *min_score, "Keep candidates scoring >= this");
    sub->add_option("--top-k", *top_k, "Keep the k best candidates")->excludes(min_opt);
    sub->add_option("--max-affix-len", opts->affix.max_affix_len, "Affix length limit")
        ->check(CLI::PositiveNumber);
    sub->add_option("--occurrence-cap", opts->affix.occurrence_cap,
                    "Per-affix occurrence cap")
        ->check(CLI::PositiveNumber);
    sub->add_option("--max-order", opts->mono_max_order,
                    "Max monolingual candidate order (0 = LM order)");
    sub->add_option("--nn-tm-in", opts->nn_tm_in, "In-domain translation net");
    sub->add_option("--nn-tm-out", opts->nn_tm_out, "Out-of-domain translation net");
    sub->add_option("--nn-lm-in", opts->nn_lm_in, "In-domain LM net");
    sub->add_option("--nn-lm-out", opts->nn_lm_out, "Out-of-domain LM net");
    add_common(sub, *args, true);
    sub->callback([=]() {
      opts->policy = pa::CasePolicy::parse(*case_letters);
      opts->method = pa::parse_rank_method(*method);
      opts->scope = pa::parse_scope(*scope);
      opts->threads = args->threads;
      opts->lenient = args->lenient;
      if (*top_k >= 0) opts->select.top_k = static_cast<std::uint64_t>(*top_k);
      if (min_opt->count() > 0) opts->select.min_score = *min_score;
      pa::AdaptReport report = pa::run_pipeline(*opts);
      progress("pipeline",
               {{"pt_added", report.merge_pt.stats.added},
                {"lm_inserted", report.merge_lm.inserted},
                {"output_entries", report.merge_pt.output_entries}});
      nlohmann::json j = report.to_json(*opts);
      write_report(args->report, j);
      if (args->report.empty()) std::cout << j.dump(2) << "\n";
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const pa::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const pa::FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 2;
  } catch (const pa::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const pa::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
