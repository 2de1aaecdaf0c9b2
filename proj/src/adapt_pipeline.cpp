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

#include "phraseadapt/adapt_pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include "phraseadapt/errors.hpp"
#include "phraseadapt/numeric.hpp"
#include "phraseadapt/parallel.hpp"

namespace phraseadapt {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  return out;
}

void finish_out(std::ofstream& out, const std::string& path) {
  out.close();
  if (!out) throw IoError("write failure on " + path);
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  for (;;) {
    std::size_t tab = line.find('\t', pos);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(pos));
      return fields;
    }
    fields.push_back(line.substr(pos, tab - pos));
    pos = tab + 1;
  }
}

// Token-normalized text (single spaces) for exact key comparisons.
std::string normalize_tokens(std::string_view field) {
  std::string out;
  std::size_t i = 0;
  while (i < field.size()) {
    while (i < field.size() && std::isspace(static_cast<unsigned char>(field[i]))) ++i;
    std::size_t start = i;
    while (i < field.size() && !std::isspace(static_cast<unsigned char>(field[i]))) ++i;
    if (i > start) {
      if (!out.empty()) out += ' ';
      out += field.substr(start, i - start);
    }
  }
  return out;
}

ParseMode mode_of(bool lenient) {
  return lenient ? ParseMode::kLenient : ParseMode::kStrict;
}

}  // namespace

RankMethod parse_rank_method(std::string_view name) {
  if (name == "op") return RankMethod::kOp;
  if (name == "nn") return RankMethod::kNn;
  if (name == "none") return RankMethod::kNone;
  throw InputError("unknown ranking method '" + std::string(name) +
                   "'; expected op, nn or none");
}

CandidateScope parse_scope(std::string_view name) {
  if (name == "connect") return CandidateScope::kConnecting;
  if (name == "all") return CandidateScope::kAll;
  throw InputError("unknown scope '" + std::string(name) + "'; expected connect or all");
}

std::vector<std::string> merge_phrase_tables(TableReader& in_pt,
                                             std::vector<PhrasePair> selected,
                                             const PenaltyPolicy& policy,
                                             const Vocab& vocab, MergePtStats* stats) {
  struct Record {
    std::string src, tgt, line;
  };
  std::vector<Record> records;
  PairKeySet in_keys;
  MergePtStats local;
  local.selected = selected.size();

  PhrasePair pair;
  while (in_pt.next(&pair)) {
    ++local.in_entries;
    in_keys.insert(pair);
    pair.append_score(policy.in_domain, policy.in_domain_text);
    Record r;
    r.src = serialize_phrase(vocab, pair.src);
    r.tgt = serialize_phrase(vocab, pair.tgt);
    r.line = serialize_entry(vocab, pair);
    records.push_back(std::move(r));
  }

  PairKeySet emitted;
  for (PhrasePair& sel : selected) {
    if (in_keys.contains(sel.src, sel.tgt) || !emitted.insert(sel)) {
      ++local.duplicates_dropped;  // in-domain wins; repeats collapse
      continue;
    }
    sel.append_score(policy.out_of_domain, policy.out_of_domain_text);
    Record r;
    r.src = serialize_phrase(vocab, sel.src);
    r.tgt = serialize_phrase(vocab, sel.tgt);
    r.line = serialize_entry(vocab, sel);
    records.push_back(std::move(r));
    ++local.added;
  }

  std::stable_sort(records.begin(), records.end(), [](const Record& a, const Record& b) {
    if (a.src != b.src) return a.src < b.src;
    return a.tgt < b.tgt;
  });
  std::vector<std::string> lines;
  lines.reserve(records.size());
  for (Record& r : records) lines.push_back(std::move(r.line));
  if (stats != nullptr) *stats = local;
  return lines;
}

std::vector<std::string> select_reordering_entries(
    LineSource& in_reo, LineSource& out_reo,
    const std::vector<std::pair<std::string, std::string>>& selected_keys,
    MergeReoStats* stats) {
  struct Record {
    std::string src, tgt, line;
  };
  std::vector<Record> records;
  MergeReoStats local;

  auto canonical = [](const std::vector<std::string_view>& fields) {
    std::string line = normalize_tokens(fields[0]);
    line += " ||| ";
    line += normalize_tokens(fields[1]);
    for (std::size_t i = 2; i < fields.size(); ++i) {
      line += " ||| ";
      line += fields[i];
    }
    return line;
  };

  std::string line;
  while (in_reo.next(&line)) {
    std::vector<std::string_view> fields = split_fields(line);
    if (fields.size() < 3)
      throw FormatError("reordering entry needs at least 3 fields",
                        in_reo.line_number());
    Record r;
    r.src = normalize_tokens(fields[0]);
    r.tgt = normalize_tokens(fields[1]);
    r.line = canonical(fields);
    records.push_back(std::move(r));
    ++local.in_entries;
  }

  std::unordered_set<std::string> wanted;
  for (const auto& [src, tgt] : selected_keys) wanted.insert(src + "\t" + tgt);
  std::unordered_set<std::string> found;
  while (out_reo.next(&line)) {
    std::vector<std::string_view> fields = split_fields(line);
    if (fields.size() < 3)
      throw FormatError("reordering entry needs at least 3 fields",
                        out_reo.line_number());
    Record r;
    r.src = normalize_tokens(fields[0]);
    r.tgt = normalize_tokens(fields[1]);
    std::string key = r.src + "\t" + r.tgt;
    if (wanted.find(key) == wanted.end()) continue;
    found.insert(key);
    r.line = canonical(fields);
    records.push_back(std::move(r));
    ++local.added;
  }
  local.missing = wanted.size() - found.size();

  std::stable_sort(records.begin(), records.end(), [](const Record& a, const Record& b) {
    if (a.src != b.src) return a.src < b.src;
    return a.tgt < b.tgt;
  });
  std::vector<std::string> lines;
  lines.reserve(records.size());
  for (Record& r : records) lines.push_back(std::move(r.line));
  if (stats != nullptr) *stats = local;
  return lines;
}

NgramLm augment_lm(const NgramLm& in_lm,
                   const std::vector<std::pair<Phrase, double>>& selected,
                   const Vocab& vocab) {
  NgramLm merged = in_lm;
  merged.insert_ngrams(selected);
  merged.renormalize(vocab);
  return merged;
}

void attach_qin_feature(LineSource& pt, const NnModel& model_in, Vocab& vocab,
                        std::ostream& out, std::uint64_t* entries) {
  std::string line;
  std::uint64_t count = 0;
  while (pt.next(&line)) {
    PhrasePair pair = parse_entry(vocab, line, pt.line_number());
    double q = q_score(model_in, vocab, pair);
    pair.append_score(q, format_score12(q));
    out << serialize_entry(vocab, pair) << '\n';
    ++count;
  }
  if (entries != nullptr) *entries = count;
}

double interpolate_lm_qin(const NgramLm& lm, const NnModel& model_in,
                          const Vocab& vocab, double lambda, const Phrase& query) {
  if (lambda < 0.0 || lambda > 1.0) throw InputError("lambda must be in [0, 1]");
  if (lambda == 1.0) return lm.sequence_logprob(query);
  double q = q_score_lm(model_in, vocab, query);
  double len = static_cast<double>(query.ids.size());
  if (lambda == 0.0) return len * std::log10(q);
  double p_lm = std::pow(10.0, lm.sequence_logprob(query));
  double p_nn = std::pow(q, len);
  return std::log10(lambda * p_lm + (1.0 - lambda) * p_nn);
}

// --- stages -----------------------------------------------------------------

namespace {

struct InDomainTable {
  std::vector<Phrase> src_phrases;
  std::vector<Phrase> tgt_phrases;
  PairKeySet keys;
  TableStats stats;
};

InDomainTable load_in_domain(const std::string& path, Vocab& vocab, bool lenient) {
  InDomainTable table;
  FileLineSource lines(path);
  TableReader reader(lines, vocab, mode_of(lenient));
  PhrasePair pair;
  while (reader.next(&pair)) {
    table.keys.insert(pair);
    table.src_phrases.push_back(std::move(pair.src));
    table.tgt_phrases.push_back(std::move(pair.tgt));
  }
  table.stats = reader.stats();
  return table;
}

}  // namespace

ExtractReport run_extract(const ExtractOptions& options) {
  if (options.in_pt.empty()) throw InputError("extract needs an in-domain phrase table");
  ExtractReport report;
  auto start = Clock::now();
  Vocab vocab;
  InDomainTable in_table = load_in_domain(options.in_pt, vocab, options.lenient);
  report.in_pt_stats = in_table.stats;
  AffixIndex src_index = build_affix_index(in_table.src_phrases, options.affix);
  AffixIndex tgt_index = build_affix_index(in_table.tgt_phrases, options.affix);

  std::uint64_t parsed_bytes = 0;
  double classify_seconds = 0.0;

  if (!options.bilingual_out.empty()) {
    if (options.out_pt.empty())
      throw InputError("bilingual extraction needs an out-of-domain phrase table");
    FileLineSource lines(options.out_pt);
    TableReader reader(lines, vocab, mode_of(options.lenient));
    std::vector<BilingualCandidate> candidates;
    auto classify_start = Clock::now();
    if (options.scope == CandidateScope::kConnecting) {
      candidates = extract_bilingual_candidates(reader, src_index, tgt_index,
                                                in_table.keys, options.policy,
                                                &report.bilingual);
    } else {
      // Direct adaptation: every out-of-domain pair is a candidate; the case
      // label is still recorded for diagnostics.
      PairKeySet emitted;
      PhrasePair pair;
      while (reader.next(&pair)) {
        ++report.bilingual.seen;
        ConnectCase c = classify_pair(src_index, tgt_index, pair);
        if (c != ConnectCase::kNone) ++report.bilingual.connecting;
        if (in_table.keys.contains(pair.src, pair.tgt)) {
          ++report.bilingual.in_domain_duplicates;
          continue;
        }
        if (!emitted.insert(pair)) {
          ++report.bilingual.repeated_candidates;
          continue;
        }
        ++report.bilingual.accepted;
        candidates.push_back(BilingualCandidate{std::move(pair), c});
        pair = PhrasePair{};
      }
    }
    classify_seconds = ms_since(classify_start) / 1000.0;
    report.out_pt_stats = reader.stats();
    parsed_bytes += lines.byte_offset();

    std::ofstream out = open_out(options.bilingual_out);
    for (const BilingualCandidate& c : candidates) {
      out << case_letter(c.connect_case) << '\t'
          << serialize_phrase(vocab, c.pair.src) << '\t'
          << serialize_phrase(vocab, c.pair.tgt) << '\n';
    }
    finish_out(out, options.bilingual_out);
  }

  if (!options.monolingual_out.empty()) {
    if (options.out_lm.empty())
      throw InputError("monolingual extraction needs an out-of-domain LM");
    if (options.in_lm_tgt.empty())
      throw InputError("monolingual extraction needs the in-domain target LM");
    NgramLm out_lm = parse_arpa_file(options.out_lm, vocab);
    NgramLm in_lm = parse_arpa_file(options.in_lm_tgt, vocab);
    int max_order = options.mono_max_order > 0
                        ? std::min(options.mono_max_order, out_lm.order())
                        : out_lm.order();
    std::vector<std::pair<Phrase, double>> mono;
    if (options.scope == CandidateScope::kConnecting) {
      mono = extract_monolingual_candidates(out_lm, in_lm, tgt_index, max_order,
                                            vocab, &report.monolingual);
    } else {
      for (int n = 2; n <= max_order; ++n) {
        out_lm.for_each_sorted(vocab, n, [&](std::span<const TokenId> ngram,
                                             const NgramEntry& e) {
          if (e.placeholder) return;
          ++report.monolingual.seen;
          const NgramEntry* existing = in_lm.find(ngram);
          if (existing != nullptr && !existing->placeholder) {
            ++report.monolingual.in_domain_duplicates;
            return;
          }
          ++report.monolingual.accepted;
          mono.emplace_back(Phrase{std::vector<TokenId>(ngram.begin(), ngram.end())},
                            e.logprob);
        });
      }
    }
    std::ofstream out = open_out(options.monolingual_out);
    for (const auto& [phrase, lp] : mono)
      out << format_log10(lp) << '\t' << serialize_phrase(vocab, phrase) << '\n';
    finish_out(out, options.monolingual_out);
  }

  report.elapsed_ms = ms_since(start);
  if (classify_seconds > 0.0 && report.bilingual.seen > 0)
    report.classify_entries_per_sec =
        static_cast<double>(report.bilingual.seen) / classify_seconds;
  double minutes = report.elapsed_ms / 60000.0;
  if (minutes > 0.0 && parsed_bytes > 0)
    report.parse_mb_per_min =
        static_cast<double>(parsed_bytes) / (1024.0 * 1024.0) / minutes;
  return report;
}

namespace {

struct TsvPair {
  Phrase src, tgt;
};

std::vector<TsvPair> read_bilingual_tsv(const std::string& path, Vocab& vocab,
                                        std::size_t phrase_fields) {
  std::vector<TsvPair> out;
  FileLineSource lines(path);
  std::string line;
  while (lines.next(&line)) {
    if (line.empty()) continue;
    std::vector<std::string_view> fields = split_tabs(line);
    if (fields.size() < phrase_fields + 1)
      throw FormatError("expected " + std::to_string(phrase_fields + 1) +
                            " tab-separated columns in " + path,
                        lines.line_number());
    TsvPair p;
    p.src = parse_phrase(vocab, fields[1]);
    if (phrase_fields == 2) p.tgt = parse_phrase(vocab, fields[2]);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

RankReport run_rank(const RankOptions& options) {
  RankReport report;
  auto start = Clock::now();
  Vocab vocab;

  // Inputs shared by the OP scorers; loaded lazily so the empty-candidate
  // (or NN-only) paths never require them.
  std::optional<AffixIndex> src_index, tgt_index;
  std::optional<NgramLm> src_lm, tgt_lm;
  auto ensure_op_inputs = [&](bool need_source_side) {
    if (!tgt_index.has_value()) {
      if (options.in_pt.empty())
        throw InputError("OP ranking needs the in-domain phrase table");
      InDomainTable in_table = load_in_domain(options.in_pt, vocab, options.lenient);
      src_index.emplace(build_affix_index(in_table.src_phrases, options.affix));
      tgt_index.emplace(build_affix_index(in_table.tgt_phrases, options.affix));
    }
    if (options.in_lm_tgt.empty())
      throw InputError("OP ranking needs the in-domain target LM");
    if (!tgt_lm.has_value()) tgt_lm.emplace(parse_arpa_file(options.in_lm_tgt, vocab));
    if (need_source_side && !src_lm.has_value()) {
      if (options.in_lm_src.empty())
        throw InputError("OP ranking needs the in-domain source LM");
      src_lm.emplace(parse_arpa_file(options.in_lm_src, vocab));
    }
  };

  if (!options.ranked_bilingual_out.empty()) {
    if (options.bilingual_candidates.empty())
      throw InputError("rank needs a bilingual candidate file");
    std::vector<TsvPair> pairs = read_bilingual_tsv(options.bilingual_candidates, vocab, 2);
    report.bilingual_candidates = pairs.size();
    std::vector<double> scores(pairs.size(), 0.0);

    if (!pairs.empty() && options.method == RankMethod::kOp) {
      ensure_op_inputs(true);
      OpScorer src_scorer(*src_index, *src_lm);
      OpScorer tgt_scorer(*tgt_index, *tgt_lm);
      parallel_chunks(pairs.size(), options.threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
          PhrasePair pp;
          pp.src = pairs[i].src;
          pp.tgt = pairs[i].tgt;
          scores[i] = pair_op_score(pp, src_scorer, tgt_scorer);
        }
      });
    } else if (!pairs.empty() && options.method == RankMethod::kNn) {
      if (options.nn_tm_in.empty() || options.nn_tm_out.empty())
        throw InputError("NN ranking needs --nn-tm-in and --nn-tm-out models");
      NnModel tm_in = NnModel::load(options.nn_tm_in);
      NnModel tm_out = NnModel::load(options.nn_tm_out);
      parallel_chunks(pairs.size(), options.threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
          PhrasePair pp;
          pp.src = pairs[i].src;
          pp.tgt = pairs[i].tgt;
          scores[i] = d_minus(tm_in, tm_out, vocab, pp);
        }
      });
    }

    std::vector<std::pair<std::string, std::string>> keys(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i)
      keys[i] = {serialize_phrase(vocab, pairs[i].src),
                 serialize_phrase(vocab, pairs[i].tgt)};
    std::vector<RankedCandidate> ranked = rank_candidates(scores, keys, options.select);
    report.bilingual_selected = ranked.size();

    std::ofstream out = open_out(options.ranked_bilingual_out);
    for (const RankedCandidate& r : ranked)
      out << format_score12(r.score) << '\t' << r.sort_src << '\t' << r.sort_tgt << '\n';
    finish_out(out, options.ranked_bilingual_out);
  }

  if (!options.ranked_monolingual_out.empty()) {
    if (options.monolingual_candidates.empty())
      throw InputError("rank needs a monolingual candidate file");
    std::vector<TsvPair> ngrams =
        read_bilingual_tsv(options.monolingual_candidates, vocab, 1);
    report.monolingual_candidates = ngrams.size();
    std::vector<double> scores(ngrams.size(), 0.0);

    if (!ngrams.empty() && options.method == RankMethod::kOp) {
      ensure_op_inputs(false);
      OpScorer tgt_scorer(*tgt_index, *tgt_lm);
      parallel_chunks(ngrams.size(), options.threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
          scores[i] = ngrams[i].src.ids.size() < 2
                          ? 0.0
                          : tgt_scorer.occurring_probability(ngrams[i].src).value;
        }
      });
    } else if (!ngrams.empty() && options.method == RankMethod::kNn) {
      if (options.nn_lm_in.empty() || options.nn_lm_out.empty())
        throw InputError("NN ranking needs --nn-lm-in and --nn-lm-out models");
      NnModel lm_in = NnModel::load(options.nn_lm_in);
      NnModel lm_out = NnModel::load(options.nn_lm_out);
      parallel_chunks(ngrams.size(), options.threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i)
          scores[i] = d_minus_lm(lm_in, lm_out, vocab, ngrams[i].src);
      });
    }

    std::vector<std::pair<std::string, std::string>> keys(ngrams.size());
    for (std::size_t i = 0; i < ngrams.size(); ++i)
      keys[i] = {serialize_phrase(vocab, ngrams[i].src), std::string()};
    std::vector<RankedCandidate> ranked = rank_candidates(scores, keys, options.select);
    report.monolingual_selected = ranked.size();

    std::ofstream out = open_out(options.ranked_monolingual_out);
    for (const RankedCandidate& r : ranked)
      out << format_score12(r.score) << '\t' << r.sort_src << '\n';
    finish_out(out, options.ranked_monolingual_out);
  }

  report.elapsed_ms = ms_since(start);
  return report;
}

MergePtReport run_merge_pt(const MergePtOptions& options) {
  MergePtReport report;
  auto start = Clock::now();
  Vocab vocab;

  std::vector<PhrasePair> selected;
  if (!options.selected.empty()) {
    std::vector<TsvPair> keys = read_bilingual_tsv(options.selected, vocab, 2);
    if (!keys.empty()) {
      if (options.out_pt.empty())
        throw InputError("merging selected pairs needs the out-of-domain table");
      PairKeySet wanted;
      for (const TsvPair& k : keys) wanted.insert(k.src, k.tgt);
      std::unordered_map<std::vector<TokenId>, PhrasePair, PhraseHash> fetched;
      FileLineSource lines(options.out_pt);
      TableReader reader(lines, vocab, mode_of(options.lenient));
      PhrasePair pair;
      while (reader.next(&pair)) {
        if (!wanted.contains(pair.src, pair.tgt)) continue;
        std::vector<TokenId> key = pair.src.ids;
        key.push_back(-1);
        key.insert(key.end(), pair.tgt.ids.begin(), pair.tgt.ids.end());
        fetched.try_emplace(std::move(key), std::move(pair));  // first wins
        pair = PhrasePair{};
      }
      for (const TsvPair& k : keys) {
        std::vector<TokenId> key = k.src.ids;
        key.push_back(-1);
        key.insert(key.end(), k.tgt.ids.begin(), k.tgt.ids.end());
        auto it = fetched.find(key);
        if (it == fetched.end()) {
          ++report.selected_missing_in_out_pt;
          continue;
        }
        selected.push_back(it->second);
      }
    }
  }

  FileLineSource in_lines(options.in_pt);
  TableReader in_reader(in_lines, vocab, mode_of(options.lenient));
  std::vector<std::string> lines = merge_phrase_tables(
      in_reader, std::move(selected), options.penalty, vocab, &report.stats);
  report.output_entries = lines.size();

  std::ofstream out = open_out(options.merged_out);
  for (const std::string& line : lines) out << line << '\n';
  finish_out(out, options.merged_out);
  report.elapsed_ms = ms_since(start);
  return report;
}

MergeLmReport run_merge_lm(const MergeLmOptions& options) {
  MergeLmReport report;
  auto start = Clock::now();
  Vocab vocab;
  NgramLm in_lm = parse_arpa_file(options.in_lm, vocab);

  std::vector<std::pair<Phrase, double>> selected;
  if (!options.selected.empty()) {
    std::vector<TsvPair> ngrams = read_bilingual_tsv(options.selected, vocab, 1);
    if (!ngrams.empty()) {
      if (options.out_lm.empty())
        throw InputError("merging selected n-grams needs the out-of-domain LM");
      NgramLm out_lm = parse_arpa_file(options.out_lm, vocab);
      for (const TsvPair& item : ngrams) {
        const NgramEntry* e = out_lm.find(item.src.ids);
        if (e == nullptr || e->placeholder) {
          ++report.missing_in_out_lm;
          continue;
        }
        selected.emplace_back(item.src, e->logprob);
      }
    }
  }
  report.inserted = selected.size();

  NgramLm merged = augment_lm(in_lm, selected, vocab);
  report.output_ngrams = merged.total_entries();
  std::ofstream out = open_out(options.merged_out);
  serialize_arpa(merged, vocab, out);
  finish_out(out, options.merged_out);
  report.elapsed_ms = ms_since(start);
  return report;
}

MergeReoReport run_merge_reo(const MergeReoOptions& options) {
  MergeReoReport report;
  auto start = Clock::now();
  Vocab vocab;
  std::vector<std::pair<std::string, std::string>> keys;
  if (!options.selected.empty()) {
    std::vector<TsvPair> pairs = read_bilingual_tsv(options.selected, vocab, 2);
    keys.reserve(pairs.size());
    for (const TsvPair& p : pairs)
      keys.emplace_back(serialize_phrase(vocab, p.src), serialize_phrase(vocab, p.tgt));
  }
  FileLineSource in_lines(options.in_reo);
  FileLineSource out_lines(options.out_reo);
  std::vector<std::string> lines =
      select_reordering_entries(in_lines, out_lines, keys, &report.stats);
  std::ofstream out = open_out(options.merged_out);
  for (const std::string& line : lines) out << line << '\n';
  finish_out(out, options.merged_out);
  report.elapsed_ms = ms_since(start);
  return report;
}

std::uint64_t run_qin_feature(const QinFeatureOptions& options) {
  Vocab vocab;
  NnModel model = NnModel::load(options.model);
  FileLineSource lines(options.pt);
  std::ofstream out = open_out(options.out);
  std::uint64_t entries = 0;
  attach_qin_feature(lines, model, vocab, out, &entries);
  finish_out(out, options.out);
  return entries;
}

AdaptReport run_pipeline(const PipelineOptions& options) {
  if (options.in_pt.empty()) throw InputError("pipeline needs --in-pt");
  if (options.merged_pt.empty()) throw InputError("pipeline needs --merged-pt");

  PipelineOptions opts = options;  // resolve intermediate paths
  auto defaulted = [&](std::string& path, const char* suffix) {
    if (path.empty()) path = opts.merged_pt + suffix;
  };
  bool bilingual = !opts.out_pt.empty();
  bool monolingual = !opts.out_lm.empty() && !opts.merged_lm.empty();
  bool reordering = !opts.in_reo.empty() && !opts.merged_reo.empty();
  if (bilingual) {
    defaulted(opts.bilingual_candidates, ".candidates.tsv");
    defaulted(opts.ranked_bilingual, ".ranked.tsv");
  }
  if (monolingual) {
    defaulted(opts.monolingual_candidates, ".candidates-lm.tsv");
    defaulted(opts.ranked_monolingual, ".ranked-lm.tsv");
  }

  AdaptReport report;

  ExtractOptions extract;
  extract.in_pt = opts.in_pt;
  extract.out_pt = opts.out_pt;
  extract.in_lm_tgt = opts.in_lm_tgt;
  extract.out_lm = opts.out_lm;
  extract.bilingual_out = bilingual ? opts.bilingual_candidates : "";
  extract.monolingual_out = monolingual ? opts.monolingual_candidates : "";
  extract.policy = opts.policy;
  extract.scope = opts.scope;
  extract.affix = opts.affix;
  extract.mono_max_order = opts.mono_max_order;
  extract.lenient = opts.lenient;
  report.extract = run_extract(extract);

  RankOptions rank;
  rank.method = opts.method;
  rank.in_pt = opts.in_pt;
  rank.in_lm_src = opts.in_lm_src;
  rank.in_lm_tgt = opts.in_lm_tgt;
  rank.bilingual_candidates = bilingual ? opts.bilingual_candidates : "";
  rank.monolingual_candidates = monolingual ? opts.monolingual_candidates : "";
  rank.ranked_bilingual_out = bilingual ? opts.ranked_bilingual : "";
  rank.ranked_monolingual_out = monolingual ? opts.ranked_monolingual : "";
  rank.nn_tm_in = opts.nn_tm_in;
  rank.nn_tm_out = opts.nn_tm_out;
  rank.nn_lm_in = opts.nn_lm_in;
  rank.nn_lm_out = opts.nn_lm_out;
  rank.select = opts.select;
  rank.affix = opts.affix;
  rank.threads = opts.threads;
  rank.lenient = opts.lenient;
  report.rank = run_rank(rank);

  MergePtOptions merge_pt;
  merge_pt.in_pt = opts.in_pt;
  merge_pt.out_pt = opts.out_pt;
  merge_pt.selected = bilingual ? opts.ranked_bilingual : "";
  merge_pt.merged_out = opts.merged_pt;
  merge_pt.penalty = opts.penalty;
  merge_pt.lenient = opts.lenient;
  report.merge_pt = run_merge_pt(merge_pt);

  if (monolingual) {
    if (opts.in_lm_tgt.empty())
      throw InputError("merging the LM needs --in-lm-tgt");
    MergeLmOptions merge_lm;
    merge_lm.in_lm = opts.in_lm_tgt;
    merge_lm.out_lm = opts.out_lm;
    merge_lm.selected = opts.ranked_monolingual;
    merge_lm.merged_out = opts.merged_lm;
    report.merge_lm = run_merge_lm(merge_lm);
    report.merged_lm_written = true;
  }

  if (reordering) {
    if (opts.out_reo.empty())
      throw InputError("merging the reordering table needs --out-reordering");
    MergeReoOptions merge_reo;
    merge_reo.in_reo = opts.in_reo;
    merge_reo.out_reo = opts.out_reo;
    merge_reo.selected = bilingual ? opts.ranked_bilingual : "";
    merge_reo.merged_out = opts.merged_reo;
    report.merge_reo = run_merge_reo(merge_reo);
    report.merged_reo_written = true;
  }

  return report;
}

namespace {

nlohmann::json stats_json(const ExtractStats& s) {
  return {{"seen", s.seen},
          {"connecting", s.connecting},
          {"accepted", s.accepted},
          {"in_domain_duplicates", s.in_domain_duplicates},
          {"repeated_candidates", s.repeated_candidates}};
}

nlohmann::json table_stats_json(const TableStats& s) {
  return {{"entries", s.entries},
          {"max_src_len", s.max_src_len},
          {"max_tgt_len", s.max_tgt_len},
          {"distinct_sources", s.distinct_sources},
          {"malformed_skipped", s.malformed_skipped}};
}

}  // namespace

nlohmann::json AdaptReport::to_json(const PipelineOptions& options) const {
  nlohmann::json j;
  j["config"] = {
      {"method", options.method == RankMethod::kOp
                     ? "op"
                     : options.method == RankMethod::kNn ? "nn" : "none"},
      {"scope", options.scope == CandidateScope::kConnecting ? "connect" : "all"},
      {"top_k", options.select.top_k.has_value()
                    ? nlohmann::json(*options.select.top_k)
                    : nlohmann::json(nullptr)},
      {"min_score", options.select.min_score.has_value()
                        ? nlohmann::json(*options.select.min_score)
                        : nlohmann::json(nullptr)},
      {"max_affix_len", options.affix.max_affix_len},
      {"occurrence_cap", options.affix.occurrence_cap},
      {"threads", options.threads},
  };
  j["extract"] = {
      {"bilingual", stats_json(extract.bilingual)},
      {"monolingual", stats_json(extract.monolingual)},
      {"in_pt", table_stats_json(extract.in_pt_stats)},
      {"out_pt", table_stats_json(extract.out_pt_stats)},
  };
  j["rank"] = {
      {"bilingual_candidates", rank.bilingual_candidates},
      {"bilingual_selected", rank.bilingual_selected},
      {"monolingual_candidates", rank.monolingual_candidates},
      {"monolingual_selected", rank.monolingual_selected},
  };
  j["merge_pt"] = {
      {"in_entries", merge_pt.stats.in_entries},
      {"selected", merge_pt.stats.selected},
      {"added", merge_pt.stats.added},
      {"duplicates_dropped", merge_pt.stats.duplicates_dropped},
      {"selected_missing_in_out_pt", merge_pt.selected_missing_in_out_pt},
      {"output_entries", merge_pt.output_entries},
  };
  if (merged_lm_written) {
    j["merge_lm"] = {
        {"inserted", merge_lm.inserted},
        {"missing_in_out_lm", merge_lm.missing_in_out_lm},
        {"output_ngrams", merge_lm.output_ngrams},
    };
  }
  if (merged_reo_written) {
    j["merge_reo"] = {
        {"in_entries", merge_reo.stats.in_entries},
        {"added", merge_reo.stats.added},
        {"missing", merge_reo.stats.missing},
    };
  }
  j["timings_ms"] = {
      {"extract", extract.elapsed_ms},
      {"rank", rank.elapsed_ms},
      {"merge_pt", merge_pt.elapsed_ms},
      {"merge_lm", merge_lm.elapsed_ms},
      {"merge_reo", merge_reo.elapsed_ms},
  };
  j["throughput"] = {
      {"classify_entries_per_sec", extract.classify_entries_per_sec},
      {"parse_mb_per_min", extract.parse_mb_per_min},
  };
  return j;
}

}  // namespace phraseadapt
