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

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "phraseadapt/adapt_pipeline.hpp"
#include "phraseadapt/errors.hpp"
#include "phraseadapt/numeric.hpp"
#include "test_util.hpp"

using namespace phraseadapt;

namespace {

std::vector<std::string> merge_from_text(Vocab& v, const std::string& in_table,
                                         std::vector<PhrasePair> selected,
                                         MergePtStats* stats = nullptr) {
  std::istringstream in(in_table);
  StreamLineSource lines(in);
  TableReader reader(lines, v);
  return merge_phrase_tables(reader, std::move(selected), PenaltyPolicy{}, v, stats);
}

PhrasePair pair_of(Vocab& v, const char* src, const char* tgt, const char* scores) {
  return parse_entry(v, std::string(src) + " ||| " + tgt + " ||| " + scores);
}

}  // namespace

TEST_CASE("merge appends penalty 1 to in-domain and e to adapted entries") {
  Vocab v;
  MergePtStats stats;
  auto lines = merge_from_text(v, "a ||| b ||| 0.5\n",
                               {pair_of(v, "c d", "e f", "0.3")}, &stats);
  REQUIRE(lines.size() == 2);
  CHECK(lines[0] == "a ||| b ||| 0.5 1");
  CHECK(lines[1] == "c d ||| e f ||| 0.3 2.71828");
  CHECK(stats.in_entries == 1);
  CHECK(stats.added == 1);
  CHECK(stats.duplicates_dropped == 0);
}

TEST_CASE("empty selection annotates the in-domain table only") {
  Vocab v;
  auto lines = merge_from_text(v, "a ||| b ||| 0.5\nc ||| d ||| 0.25 0.5\n", {});
  REQUIRE(lines.size() == 2);
  CHECK(lines[0] == "a ||| b ||| 0.5 1");
  CHECK(lines[1] == "c ||| d ||| 0.25 0.5 1");
}

TEST_CASE("in-domain wins on duplicates, with a drop count") {
  Vocab v;
  MergePtStats stats;
  auto lines = merge_from_text(
      v, "a ||| b ||| 0.5\n",
      {pair_of(v, "a", "b", "0.9"), pair_of(v, "x", "y", "0.1"),
       pair_of(v, "x", "y", "0.2")},
      &stats);
  REQUIRE(lines.size() == 2);
  CHECK(lines[0] == "a ||| b ||| 0.5 1");
  CHECK(lines[1] == "x ||| y ||| 0.1 2.71828");
  CHECK(stats.duplicates_dropped == 2);  // in-domain shadow + repeated key
  CHECK(stats.added == 1);
}

TEST_CASE("merged output is sorted and re-parses cleanly") {
  Vocab v;
  std::mt19937_64 rng(71);
  std::vector<TokenId> ids = testutil::make_token_ids(v, 12);
  std::ostringstream in_table;
  for (int i = 0; i < 50; ++i) {
    PhrasePair p;
    p.src = testutil::random_phrase(rng, ids, 1, 4);
    p.tgt = testutil::random_phrase(rng, ids, 1, 4);
    p.scores = {0.25, 0.5};
    in_table << serialize_entry(v, p) << "\n";
  }
  std::vector<PhrasePair> selected;
  for (int i = 0; i < 20; ++i) {
    PhrasePair p;
    p.src = testutil::random_phrase(rng, ids, 2, 4);
    p.tgt = testutil::random_phrase(rng, ids, 2, 4);
    p.scores = {0.125};
    selected.push_back(std::move(p));
  }
  MergePtStats stats;
  auto lines = merge_from_text(v, in_table.str(), selected, &stats);
  CHECK(lines.size() == stats.in_entries + stats.added);
  CHECK(stats.added + stats.duplicates_dropped == stats.selected);

  std::string prev_src, prev_tgt;
  for (const std::string& line : lines) {
    PhrasePair p = parse_entry(v, line);  // throws on malformed output
    double penalty = p.scores.back();
    CHECK((penalty == 1.0 || std::abs(penalty - 2.71828) < 1e-12));
    std::string src = serialize_phrase(v, p.src);
    std::string tgt = serialize_phrase(v, p.tgt);
    bool ordered = prev_src < src || (prev_src == src && prev_tgt <= tgt);
    CHECK(ordered);
    prev_src = std::move(src);
    prev_tgt = std::move(tgt);
  }
}

TEST_CASE("reordering selection mirrors the phrase-table keys") {
  std::istringstream in_reo(
      "a ||| b ||| 0.2 0.3 0.5 0.2 0.3 0.5\n"
      "c ||| d ||| 0.1 0.1 0.8 0.1 0.1 0.8\n");
  std::istringstream out_reo(
      "x y ||| z ||| 0.4 0.3 0.3 0.4 0.3 0.3\n"
      "u ||| w ||| 0.6 0.2 0.2 0.6 0.2 0.2\n");
  StreamLineSource in_lines(in_reo);
  StreamLineSource out_lines(out_reo);
  MergeReoStats stats;
  auto lines = select_reordering_entries(
      in_lines, out_lines, {{"x y", "z"}, {"missing", "pair"}}, &stats);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "a ||| b ||| 0.2 0.3 0.5 0.2 0.3 0.5");
  CHECK(lines[1] == "c ||| d ||| 0.1 0.1 0.8 0.1 0.1 0.8");
  CHECK(lines[2] == "x y ||| z ||| 0.4 0.3 0.3 0.4 0.3 0.3");
  CHECK(stats.in_entries == 2);
  CHECK(stats.added == 1);
  CHECK(stats.missing == 1);
}

TEST_CASE("augment_lm: fixed point on empty selection, sums to 1 after insertion") {
  Vocab v;
  std::mt19937_64 rng(73);
  std::vector<TokenId> ids = testutil::make_token_ids(v, 15);
  NgramLm in_lm = testutil::random_lm(rng, v, ids, 2);

  NgramLm same = augment_lm(in_lm, {}, v);
  NgramLm renormed = in_lm;
  renormed.renormalize(v);
  CHECK(serialize_arpa_string(same, v) == serialize_arpa_string(renormed, v));

  std::vector<std::pair<Phrase, double>> selected = {
      {parse_phrase(v, "w1 w7"), std::log10(0.05)},
      {parse_phrase(v, "w2 w9"), std::log10(0.02)}};
  NgramLm merged = augment_lm(in_lm, selected, v);
  CHECK(testutil::max_context_sum_deviation(merged, v) < 1e-6);

  // Pre-existing n-grams keep the in-domain value.
  Phrase existing = parse_phrase(v, "w1 w7");
  double merged_value = merged.find(existing.ids)->logprob;
  std::vector<std::pair<Phrase, double>> again = {{existing, std::log10(0.9)}};
  NgramLm twice = augment_lm(merged, again, v);
  CHECK(twice.find(existing.ids)->logprob == merged_value);
}

TEST_CASE("attach_qin_feature adds exactly one deterministic column") {
  NnConfig config;
  config.window = 3;
  config.proj_dim = 4;
  config.hidden_dim = 4;
  config.seed = 3;
  NnModel model = NnModel::init(
      NnKind::kTranslation, config,
      {std::string(kUnkToken), "a", "c", "d"},
      {std::string(kUnkToken), "b", "e", "f"});

  std::string table = "a ||| b ||| 0.5 1\nc d ||| e f ||| 0.3 2.71828\n";
  auto annotate = [&]() {
    Vocab v;
    std::istringstream in(table);
    StreamLineSource lines(in);
    std::ostringstream out;
    std::uint64_t entries = 0;
    attach_qin_feature(lines, model, v, out, &entries);
    CHECK(entries == 2);
    return out.str();
  };
  std::string first = annotate();
  CHECK(first == annotate());

  Vocab v;
  std::istringstream check(first);
  StreamLineSource lines(check);
  std::string line;
  int row = 0;
  while (lines.next(&line)) {
    PhrasePair p = parse_entry(v, line);
    PhrasePair original = parse_entry(v, row == 0 ? "a ||| b ||| 0.5 1"
                                                  : "c d ||| e f ||| 0.3 2.71828");
    REQUIRE(p.scores.size() == original.scores.size() + 1);
    for (std::size_t i = 0; i < original.scores.size(); ++i)
      CHECK(p.scores[i] == original.scores[i]);
    // The appended column is q_score of the entry under the model.
    double expected = q_score(model, v, original);
    CHECK(p.scores.back() == doctest::Approx(expected).epsilon(1e-10));
    ++row;
  }
  CHECK(row == 2);
}

TEST_CASE("interpolate_lm_qin boundaries and midpoint") {
  Vocab v;
  std::mt19937_64 rng(79);
  std::vector<TokenId> ids = testutil::make_token_ids(v, 6);
  NgramLm lm = testutil::random_lm(rng, v, ids, 2);

  NnConfig config;
  config.window = 3;
  config.proj_dim = 4;
  config.hidden_dim = 4;
  config.seed = 11;
  std::vector<std::string> tokens{std::string(kUnkToken)};
  for (int i = 0; i < 6; ++i) tokens.push_back("w" + std::to_string(i));
  NnModel model = NnModel::init(NnKind::kLanguageModel, config, tokens, tokens);

  Phrase query = parse_phrase(v, "w0 w3 w2");
  double lm_lp = lm.sequence_logprob(query);
  double q = q_score_lm(model, v, query);

  CHECK(interpolate_lm_qin(lm, model, v, 1.0, query) == lm_lp);
  CHECK(interpolate_lm_qin(lm, model, v, 0.0, query) ==
        doctest::Approx(3.0 * std::log10(q)).epsilon(1e-12));
  double expected_mid =
      std::log10(0.5 * std::pow(10.0, lm_lp) + 0.5 * std::pow(q, 3.0));
  CHECK(interpolate_lm_qin(lm, model, v, 0.5, query) ==
        doctest::Approx(expected_mid).epsilon(1e-12));
  CHECK_THROWS_AS(interpolate_lm_qin(lm, model, v, 1.5, query), InputError);
}
