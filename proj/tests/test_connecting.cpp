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

#include <random>
#include <sstream>

#include "phraseadapt/connecting.hpp"
#include "phraseadapt/errors.hpp"
#include "test_util.hpp"

using namespace phraseadapt;

namespace {

std::vector<Phrase> parse_all(Vocab& v, const std::vector<std::string>& texts) {
  std::vector<Phrase> out;
  out.reserve(texts.size());
  for (const std::string& t : texts) out.push_back(parse_phrase(v, t));
  return out;
}

}  // namespace

TEST_CASE("affix index stores every prefix and suffix including the full phrase") {
  Vocab v;
  AffixIndex index = build_affix_index(parse_all(v, {"would like to learn"}));
  Phrase full = parse_phrase(v, "would like to learn");
  CHECK_FALSE(index.suffix_occurrences(parse_phrase(v, "learn").ids).empty());
  CHECK_FALSE(index.suffix_occurrences(parse_phrase(v, "to learn").ids).empty());
  CHECK_FALSE(index.suffix_occurrences(parse_phrase(v, "like to learn").ids).empty());
  CHECK_FALSE(index.suffix_occurrences(full.ids).empty());
  CHECK_FALSE(index.prefix_occurrences(parse_phrase(v, "would").ids).empty());
  CHECK_FALSE(index.prefix_occurrences(full.ids).empty());
  CHECK(index.prefix_occurrences(parse_phrase(v, "like").ids).empty());
  // 4 prefixes + 4 suffixes for a single length-4 phrase
  CHECK(index.affix_entries() == 8);
}

TEST_CASE("empty index never connects; duplicates are collapsed") {
  Vocab v;
  AffixIndex empty = build_affix_index({});
  CHECK_FALSE(empty.is_connecting(parse_phrase(v, "a b")).connecting());

  AffixIndex dup = build_affix_index(parse_all(v, {"a b", "a b", "a b"}));
  CHECK(dup.phrases().size() == 1);
  CHECK(dup.prefix_occurrences(parse_phrase(v, "a").ids).size() == 1);
}

TEST_CASE("worked example: a b c d with witness {1}") {
  Vocab v;
  AffixIndex index = build_affix_index(parse_all(v, {"x a", "b c d y"}));
  SplitWitness w = index.is_connecting(parse_phrase(v, "a b c d"));
  CHECK(w.connecting());
  CHECK(w.splits == std::vector<int>{1});

  // Removing the prefix phrase flips the query to non-connecting.
  AffixIndex reduced = build_affix_index(parse_all(v, {"x a"}));
  CHECK_FALSE(reduced.is_connecting(parse_phrase(v, "a b c d")).connecting());
}

TEST_CASE("length-1 phrases have no valid split") {
  Vocab v;
  AffixIndex index = build_affix_index(parse_all(v, {"a", "b"}));
  CHECK_FALSE(index.is_connecting(parse_phrase(v, "a")).connecting());
  CHECK(brute_force_is_connecting(parse_all(v, {"a"}), parse_phrase(v, "a")).splits.empty());
}

TEST_CASE("index agrees with the brute-force oracle on random instances") {
  Vocab v;
  std::mt19937_64 rng(7);
  std::vector<TokenId> ids = testutil::make_token_ids(v, 12);
  for (int inst = 0; inst < 10; ++inst) {
    std::vector<Phrase> in_domain = testutil::random_phrases(rng, ids, 80, 1, 6);
    AffixIndex index = build_affix_index(in_domain);
    for (int q = 0; q < 200; ++q) {
      Phrase query = testutil::random_phrase(rng, ids, 2, 7);
      CHECK(index.is_connecting(query) == brute_force_is_connecting(in_domain, query));
    }
  }
}

TEST_CASE("witness splits are within bounds and grow monotonically") {
  Vocab v;
  std::mt19937_64 rng(13);
  std::vector<TokenId> ids = testutil::make_token_ids(v, 10);
  std::vector<Phrase> small = testutil::random_phrases(rng, ids, 30, 1, 5);
  std::vector<Phrase> large = small;
  auto extra = testutil::random_phrases(rng, ids, 30, 1, 5);
  large.insert(large.end(), extra.begin(), extra.end());
  AffixIndex small_index = build_affix_index(small);
  AffixIndex large_index = build_affix_index(large);
  for (int q = 0; q < 300; ++q) {
    Phrase query = testutil::random_phrase(rng, ids, 2, 7);
    SplitWitness ws = small_index.is_connecting(query);
    SplitWitness wl = large_index.is_connecting(query);
    for (int k : ws.splits) {
      CHECK(k >= 1);
      CHECK(k <= static_cast<int>(query.size()) - 1);
      // More in-domain phrases never remove a witness.
      CHECK(std::find(wl.splits.begin(), wl.splits.end(), k) != wl.splits.end());
    }
  }
}

TEST_CASE("classify_pair reports the strongest case") {
  Vocab v;
  // Source side connects "s1 s2" (via "x s1" + "s2 y"); target side connects
  // "t1 t2" similarly.
  AffixIndex src = build_affix_index(parse_all(v, {"x s1", "s2 y"}));
  AffixIndex tgt = build_affix_index(parse_all(v, {"x t1", "t2 y"}));
  auto pair_of = [&](const char* s, const char* t) {
    PhrasePair p;
    p.src = parse_phrase(v, s);
    p.tgt = parse_phrase(v, t);
    return p;
  };
  CHECK(classify_pair(src, tgt, pair_of("s1 s2", "t1 t2")) == ConnectCase::kBoth);
  CHECK(classify_pair(src, tgt, pair_of("s1 s2", "t2 t1")) == ConnectCase::kSourceOnly);
  CHECK(classify_pair(src, tgt, pair_of("s2 s1", "t1 t2")) == ConnectCase::kTargetOnly);
  CHECK(classify_pair(src, tgt, pair_of("s2 s1", "t2 t1")) == ConnectCase::kNone);
}

TEST_CASE("case policy parsing") {
  CasePolicy a = CasePolicy::parse("a");
  CHECK(a.accepts(ConnectCase::kBoth));
  CHECK_FALSE(a.accepts(ConnectCase::kSourceOnly));
  CasePolicy b = CasePolicy::parse("b");
  CHECK(b.accepts(ConnectCase::kBoth));
  CHECK(b.accepts(ConnectCase::kSourceOnly));
  CHECK(b.accepts(ConnectCase::kTargetOnly));
  CasePolicy cd = CasePolicy::parse("cd");
  CHECK_FALSE(cd.accepts(ConnectCase::kBoth));
  CHECK(cd.accepts(ConnectCase::kSourceOnly));
  CHECK(cd.accepts(ConnectCase::kTargetOnly));
  CHECK_THROWS_AS(CasePolicy::parse("z"), InputError);
  CHECK_THROWS_AS(CasePolicy::parse(""), InputError);
  CHECK_FALSE(CasePolicy::parse("a").accepts(ConnectCase::kNone));
}

namespace {

std::vector<BilingualCandidate> extract_from_text(Vocab& v, const std::string& table,
                                                  const AffixIndex& src,
                                                  const AffixIndex& tgt,
                                                  const PairKeySet& in_keys,
                                                  const CasePolicy& policy,
                                                  ExtractStats* stats = nullptr) {
  std::istringstream in(table);
  StreamLineSource lines(in);
  TableReader reader(lines, v);
  return extract_bilingual_candidates(reader, src, tgt, in_keys, policy, stats);
}

}  // namespace

TEST_CASE("extract_bilingual_candidates policy, dedup and order") {
  Vocab v;
  AffixIndex src = build_affix_index(parse_all(v, {"x s1", "s2 y"}));
  AffixIndex tgt = build_affix_index(parse_all(v, {"x t1", "t2 y", "t3 y"}));
  PairKeySet in_keys;
  {
    PhrasePair known;
    known.src = parse_phrase(v, "s1 s2");
    known.tgt = parse_phrase(v, "t1 t3");
    in_keys.insert(known);
  }
  std::string table =
      "s1 s2 ||| t1 t2 ||| 0.5\n"     // case a -> accepted
      "s1 s2 ||| t2 t1 ||| 0.5\n"     // case c -> rejected by policy a
      "s1 s2 ||| t1 t3 ||| 0.5\n"     // case a but already in-domain
      "s1 s2 ||| t1 t2 ||| 0.9\n"     // repeat of the first key
      "s2 s1 ||| t2 t1 ||| 0.5\n";    // case none
  ExtractStats stats;
  auto candidates = extract_from_text(v, table, src, tgt, in_keys,
                                      CasePolicy::parse("a"), &stats);
  REQUIRE(candidates.size() == 1);
  CHECK(serialize_phrase(v, candidates[0].pair.tgt) == "t1 t2");
  CHECK(candidates[0].connect_case == ConnectCase::kBoth);
  CHECK(stats.seen == 5);
  CHECK(stats.connecting == 4);
  CHECK(stats.in_domain_duplicates == 1);
  CHECK(stats.repeated_candidates == 1);
  CHECK(stats.accepted == 1);

  // Policy b also admits the source-only pair.
  auto either = extract_from_text(v, table, src, tgt, in_keys, CasePolicy::parse("b"));
  CHECK(either.size() == 2);
}

TEST_CASE("extract matches exhaustive enumeration on a synthetic table") {
  Vocab v;
  std::mt19937_64 rng(19);
  std::vector<TokenId> ids = testutil::make_token_ids(v, 8);
  std::vector<Phrase> in_src = testutil::random_phrases(rng, ids, 40, 1, 4);
  std::vector<Phrase> in_tgt = testutil::random_phrases(rng, ids, 40, 1, 4);
  AffixIndex src = build_affix_index(in_src);
  AffixIndex tgt = build_affix_index(in_tgt);

  std::vector<PhrasePair> out_pairs;
  PairKeySet in_keys;  // empty: no in-domain collisions in this test
  std::ostringstream table;
  for (int i = 0; i < 300; ++i) {
    PhrasePair p;
    p.src = testutil::random_phrase(rng, ids, 2, 5);
    p.tgt = testutil::random_phrase(rng, ids, 2, 5);
    p.scores = {0.5};
    out_pairs.push_back(p);
    table << serialize_entry(v, p) << "\n";
  }

  ExtractStats stats;
  auto got = extract_from_text(v, table.str(), src, tgt, in_keys,
                               CasePolicy::parse("a"), &stats);

  // Oracle: first occurrence of every (src, tgt) where both sides connect
  // per the brute-force witness.
  std::vector<const PhrasePair*> expected;
  PairKeySet seen;
  for (const PhrasePair& p : out_pairs) {
    bool s = !brute_force_is_connecting(in_src, p.src).splits.empty();
    bool t = !brute_force_is_connecting(in_tgt, p.tgt).splits.empty();
    if (!s || !t) continue;
    if (!seen.insert(p)) continue;
    expected.push_back(&p);
  }
  REQUIRE(got.size() == expected.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i].pair.src == expected[i]->src);
    CHECK(got[i].pair.tgt == expected[i]->tgt);
  }
}

TEST_CASE("extract_monolingual_candidates") {
  Vocab v;
  // Target index connects exactly "t1 t2".
  AffixIndex tgt = build_affix_index(parse_all(v, {"x t1", "t2 y"}));

  NgramLm out_lm(2);
  auto set1 = [&](const char* w, double p) {
    NgramEntry e;
    e.logprob = std::log10(p);
    TokenId id = v.intern(w);
    out_lm.set(std::span<const TokenId>(&id, 1), e);
  };
  set1("t1", 0.4);
  set1("t2", 0.4);
  set1("q", 0.2);
  auto set2 = [&](const char* w1, const char* w2, double p) {
    NgramEntry e;
    e.logprob = std::log10(p);
    std::vector<TokenId> key{v.intern(w1), v.intern(w2)};
    out_lm.set(key, e);
  };
  set2("t1", "t2", 0.25);  // connecting
  set2("t2", "q", 0.5);    // not connecting

  NgramLm in_lm(2);  // empty in-domain LM: nothing excluded
  auto mono = extract_monolingual_candidates(out_lm, in_lm, tgt, 2, v);
  REQUIRE(mono.size() == 1);
  CHECK(serialize_phrase(v, mono[0].first) == "t1 t2");
  CHECK(mono[0].second == doctest::Approx(std::log10(0.25)));

  // Unigrams are never emitted even though they are explicit in out_lm.
  for (const auto& [phrase, lp] : mono) CHECK(phrase.size() >= 2);

  // Explicit in the in-domain LM: excluded.
  NgramLm in_with(2);
  std::vector<TokenId> key{v.intern("t1"), v.intern("t2")};
  NgramEntry e;
  e.logprob = std::log10(0.3);
  in_with.set(key, e);
  CHECK(extract_monolingual_candidates(out_lm, in_with, tgt, 2, v).empty());

  // A placeholder in the in-domain LM does not exclude.
  NgramLm in_shell(2);
  NgramEntry shell;
  shell.logprob = kPlaceholderLogProb;
  shell.placeholder = true;
  in_shell.set(key, shell);
  CHECK(extract_monolingual_candidates(out_lm, in_shell, tgt, 2, v).size() == 1);

  CHECK_THROWS_AS(extract_monolingual_candidates(out_lm, in_lm, tgt, 3, v),
                  InputError);
}
