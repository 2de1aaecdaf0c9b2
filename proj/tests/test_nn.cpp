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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "phraseadapt/errors.hpp"
#include "phraseadapt/nn_model.hpp"
#include "phraseadapt/nn_train.hpp"

using namespace phraseadapt;

namespace {

std::vector<std::string> tokens_with_unk(std::initializer_list<const char*> words) {
  std::vector<std::string> out{std::string(kUnkToken)};
  for (const char* w : words) out.emplace_back(w);
  return out;
}

NnModel small_tm(std::uint64_t seed = 1, std::uint32_t window = 3) {
  NnConfig config;
  config.window = window;
  config.proj_dim = 4;
  config.hidden_dim = 6;
  config.seed = seed;
  return NnModel::init(NnKind::kTranslation, config,
                       tokens_with_unk({"s1", "s2", "s3", "s4", "s5"}),
                       tokens_with_unk({"t1", "t2", "t3", "t4"}));
}

NnModel small_lm(std::uint64_t seed = 1) {
  NnConfig config;
  config.window = 3;  // 2 history slots
  config.proj_dim = 4;
  config.hidden_dim = 6;
  config.seed = seed;
  auto tokens = tokens_with_unk({"u1", "u2", "u3", "u4"});
  return NnModel::init(NnKind::kLanguageModel, config, tokens, tokens);
}

std::vector<std::string_view> views(const std::vector<std::string>& v) {
  return std::vector<std::string_view>(v.begin(), v.end());
}

}  // namespace

TEST_CASE("init is deterministic in the seed, biases start at zero") {
  NnModel a = small_tm(7);
  NnModel b = small_tm(7);
  NnModel c = small_tm(8);
  auto pa = a.parameters();
  auto pb = b.parameters();
  auto pc = c.parameters();
  CHECK(std::equal(pa.begin(), pa.end(), pb.begin()));
  CHECK_FALSE(std::equal(pa.begin(), pa.end(), pc.begin()));
  for (std::size_t i = a.hidden_b_offset(); i < a.output_w_offset(); ++i)
    CHECK(pa[i] == 0.0);
  for (std::size_t i = a.output_b_offset(); i < a.parameter_count(); ++i)
    CHECK(pa[i] == 0.0);
}

TEST_CASE("forward output is a distribution") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    NnModel m = small_tm(rng());
    std::vector<std::int32_t> slots = {1, static_cast<std::int32_t>(trial % 5), kNoWord};
    std::vector<double> dist = m.forward(slots);
    double sum = 0.0;
    for (double p : dist) {
      CHECK(p >= 0.0);
      sum += p;
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("missing positions behave as zero projections") {
  NnModel m = small_tm();
  // A short source leaves trailing slots empty; their projections are zero,
  // so zeroing the projection row of an unused word changes nothing.
  std::vector<std::int32_t> words = {m.input_id("s1")};
  std::vector<std::int32_t> slots(m.input_slots());
  m.fill_slots(words, slots);
  CHECK(slots == std::vector<std::int32_t>{1, kNoWord, kNoWord});
  double before = q_score_tokens(m, views({"s1"}), views({"t1"}));
  auto params = m.parameters();
  std::size_t unused_row = m.proj_offset() + 2 * m.config().proj_dim;  // word s2
  for (std::size_t d = 0; d < m.config().proj_dim; ++d) params[unused_row + d] = 0.0;
  CHECK(q_score_tokens(m, views({"s1"}), views({"t1"})) == before);
}

TEST_CASE("sources longer than the window are truncated to its first words") {
  NnModel m = small_tm(5, 3);
  double full = q_score_tokens(m, views({"s1", "s2", "s3", "s4", "s5"}), views({"t2"}));
  double truncated = q_score_tokens(m, views({"s1", "s2", "s3"}), views({"t2"}));
  CHECK(full == truncated);
  // and the tail actually matters when inside the window
  double other = q_score_tokens(m, views({"s1", "s2", "s4"}), views({"t2"}));
  CHECK(full != other);
}

TEST_CASE("q = 1 degenerates to the single word probability exactly") {
  NnModel m = small_tm(11);
  std::vector<std::int32_t> slots(m.input_slots());
  std::vector<std::int32_t> words = {m.input_id("s2"), m.input_id("s1")};
  m.fill_slots(words, slots);
  std::vector<double> dist = m.forward(slots);
  double q = q_score_tokens(m, views({"s2", "s1"}), views({"t3"}));
  CHECK(q == dist[static_cast<std::size_t>(m.output_id("t3"))]);
}

TEST_CASE("equal target probabilities give Q = c") {
  NnModel m = small_tm(13);
  std::vector<std::int32_t> slots(m.input_slots());
  std::vector<std::int32_t> words = {m.input_id("s1")};
  m.fill_slots(words, slots);
  double p = m.forward(slots)[static_cast<std::size_t>(m.output_id("t2"))];
  // Repeating one target word makes every factor equal.
  double q = q_score_tokens(m, views({"s1"}), views({"t2", "t2", "t2"}));
  CHECK(q == doctest::Approx(p).epsilon(1e-12));
}

TEST_CASE("zeroed output layer forces a uniform softmax") {
  NnModel m = small_tm(17);
  auto params = m.parameters();
  for (std::size_t i = m.output_w_offset(); i < m.parameter_count(); ++i) params[i] = 0.0;
  double c = 1.0 / m.output_vocab();
  double q = q_score_tokens(m, views({"s3", "s4"}), views({"t1", "t4"}));
  CHECK(q == doctest::Approx(c).epsilon(1e-12));
}

TEST_CASE("q_score is invariant under target permutations") {
  std::mt19937_64 rng(19);
  std::vector<std::string> all_targets = {"t1", "t2", "t3", "t4"};
  for (int trial = 0; trial < 50; ++trial) {
    NnModel m = small_tm(rng());
    std::vector<std::string> tgt;
    std::uniform_int_distribution<int> len(2, 6);
    std::uniform_int_distribution<std::size_t> pick(0, all_targets.size() - 1);
    int n = len(rng);
    for (int i = 0; i < n; ++i) tgt.push_back(all_targets[pick(rng)]);
    double base = q_score_tokens(m, views({"s1", "s5"}), views(tgt));
    std::shuffle(tgt.begin(), tgt.end(), rng);
    CHECK(q_score_tokens(m, views({"s1", "s5"}), views(tgt)) == base);
  }
}

TEST_CASE("q_score_lm basics") {
  NnModel m = small_lm(23);

  // Length-1 phrase: the single word scored from an all-empty history.
  std::vector<std::int32_t> slots(m.input_slots(), kNoWord);
  std::vector<double> dist = m.forward(slots);
  CHECK(q_score_lm_tokens(m, views({"u2"})) ==
        dist[static_cast<std::size_t>(m.output_id("u2"))]);

  // Zeroed output layer: Q = 1/|V| for any phrase.
  NnModel uniform = small_lm(29);
  auto params = uniform.parameters();
  for (std::size_t i = uniform.output_w_offset(); i < uniform.parameter_count(); ++i)
    params[i] = 0.0;
  CHECK(q_score_lm_tokens(uniform, views({"u1", "u3", "u2"})) ==
        doctest::Approx(1.0 / uniform.output_vocab()).epsilon(1e-12));

  // Unlike the translation score, reordering changes the histories.
  double ab = q_score_lm_tokens(m, views({"u1", "u2"}));
  double ba = q_score_lm_tokens(m, views({"u2", "u1"}));
  CHECK(ab != ba);
}

TEST_CASE("d_minus identities") {
  NnModel a = small_tm(31);
  NnModel b = small_tm(37);
  Vocab v;
  PhrasePair pair;
  pair.src = parse_phrase(v, "s1 s2");
  pair.tgt = parse_phrase(v, "t1 t2");
  CHECK(d_minus(a, a, v, pair) == 0.0);
  CHECK(d_minus(a, b, v, pair) == -d_minus(b, a, v, pair));

  NnModel different = NnModel::init(NnKind::kTranslation, a.config(),
                                    tokens_with_unk({"s1"}), tokens_with_unk({"t1"}));
  CHECK_THROWS_AS(d_minus(a, different, v, pair), InputError);

  NnModel lm1 = small_lm(41);
  NnModel lm2 = small_lm(43);
  Phrase phrase = parse_phrase(v, "u1 u2 u3");
  CHECK(d_minus_lm(lm1, lm1, v, phrase) == 0.0);
  CHECK(d_minus_lm(lm1, lm2, v, phrase) == -d_minus_lm(lm2, lm1, v, phrase));
  CHECK_THROWS_AS(d_minus(lm1, a, v, pair), InputError);
}

namespace {

std::vector<NnExample> memorizable_examples(const NnModel& m) {
  // Ten distinct source patterns, each with a fixed target.
  std::vector<NnExample> examples;
  const char* sources[10][2] = {{"s1", "s2"}, {"s2", "s1"}, {"s3", "s1"}, {"s1", "s4"},
                                {"s5", "s2"}, {"s2", "s3"}, {"s4", "s4"}, {"s3", "s5"},
                                {"s5", "s5"}, {"s4", "s1"}};
  const char* targets[10] = {"t1", "t2", "t3", "t4", "t1",
                             "t2", "t3", "t4", "t1", "t2"};
  for (int i = 0; i < 10; ++i) {
    std::vector<std::int32_t> words = {m.input_id(sources[i][0]),
                                       m.input_id(sources[i][1])};
    NnExample ex;
    ex.slots.resize(m.input_slots());
    m.fill_slots(words, ex.slots);
    ex.target = m.output_id(targets[i]);
    examples.push_back(std::move(ex));
  }
  return examples;
}

}  // namespace

TEST_CASE("training memorizes a tiny example set") {
  NnConfig config;
  config.window = 3;
  config.proj_dim = 8;
  config.hidden_dim = 16;
  config.seed = 5;
  config.learning_rate = 0.3;
  config.epochs = 400;
  config.batch_size = 10;  // full batch: smooth descent
  NnModel m = NnModel::init(NnKind::kTranslation, config,
                            tokens_with_unk({"s1", "s2", "s3", "s4", "s5"}),
                            tokens_with_unk({"t1", "t2", "t3", "t4"}));
  std::vector<NnExample> examples = memorizable_examples(m);
  TrainResult result = train(m, examples);
  REQUIRE(result.epoch_loss.size() == 400);
  for (std::size_t e = 1; e < result.epoch_loss.size(); ++e)
    CHECK(result.epoch_loss[e] <= result.epoch_loss[e - 1] + 1e-9);
  CHECK(result.epoch_loss.back() < 0.1);
}

TEST_CASE("zero epochs leave the model untouched; training is bit-reproducible") {
  NnModel m = small_tm(47);
  std::vector<NnExample> examples = memorizable_examples(m);

  NnModel frozen = m;
  {
    NnConfig config = frozen.config();
    config.epochs = 0;
    NnModel zero = NnModel::init(NnKind::kTranslation, config, frozen.input_tokens(),
                                 frozen.output_tokens());
    std::vector<double> before(zero.parameters().begin(), zero.parameters().end());
    TrainResult r = train(zero, examples);
    CHECK(r.epoch_loss.empty());
    CHECK(std::equal(before.begin(), before.end(), zero.parameters().begin()));
  }

  NnModel m2 = small_tm(47);
  train(m, examples);
  train(m2, examples);
  auto p1 = m.parameters();
  auto p2 = m2.parameters();
  CHECK(std::equal(p1.begin(), p1.end(), p2.begin()));
}

TEST_CASE("analytic gradients match central differences") {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 5; ++trial) {
    NnModel m = small_tm(rng());
    NnExample ex;
    ex.slots = {1, 3, kNoWord};
    ex.target = 2;
    GradientCheckResult r = gradient_check(m, ex, 1e-4, rng(), 24);
    CHECK(r.params_checked >= 20);
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("untouched projection rows have exactly zero gradient on both paths") {
  NnModel m = small_tm(59);
  NnExample ex;
  ex.slots = {1, kNoWord, kNoWord};
  ex.target = 1;
  std::vector<double> grad(m.parameter_count(), 0.0);
  accumulate_gradient(m, ex, grad);
  // Word s3 (input id 3) is absent from the example: dead parameters.
  std::size_t dead = m.proj_offset() + 3 * m.config().proj_dim;
  CHECK(grad[dead] == 0.0);
  CHECK(numeric_gradient(m, ex, dead, 1e-4) == 0.0);
}

TEST_CASE("an injected sign bug is caught by the finite-difference oracle") {
  NnModel m = small_tm(61);
  NnExample ex;
  ex.slots = {2, 4, kNoWord};
  ex.target = 3;
  std::vector<double> grad(m.parameter_count(), 0.0);
  accumulate_gradient(m, ex, grad);
  std::size_t idx = m.output_b_offset() + static_cast<std::size_t>(ex.target);
  double analytic = -grad[idx];  // deliberately wrong sign
  double numeric = numeric_gradient(m, ex, idx, 1e-4);
  double err = std::abs(analytic - numeric) /
               std::max(std::abs(analytic), std::abs(numeric));
  CHECK(err > 1e-2);
}

TEST_CASE("gradient_check validates epsilon") {
  NnModel m = small_tm(67);
  NnExample ex;
  ex.slots = {1, kNoWord, kNoWord};
  ex.target = 0;
  CHECK_THROWS_AS(gradient_check(m, ex, 1e-8, 1), InputError);
  CHECK_THROWS_AS(gradient_check(m, ex, 1e-2, 1), InputError);
}

TEST_CASE("model container round trip and corruption detection") {
  std::string path = "test_model.pann";
  NnModel m = small_tm(71);
  std::vector<NnExample> examples = memorizable_examples(m);
  train(m, examples);
  m.save(path);

  NnModel back = NnModel::load(path);
  CHECK(back.kind() == m.kind());
  CHECK(back.config().window == m.config().window);
  CHECK(back.input_tokens() == m.input_tokens());
  CHECK(back.output_tokens() == m.output_tokens());
  auto p1 = m.parameters();
  auto p2 = back.parameters();
  REQUIRE(p1.size() == p2.size());
  CHECK(std::equal(p1.begin(), p1.end(), p2.begin()));

  // Flip one byte in the parameter block: the checksum must catch it.
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(-64, std::ios::end);
    char byte = 0;
    f.read(&byte, 1);
    f.seekp(-64, std::ios::end);
    byte = static_cast<char>(byte ^ 0x40);
    f.write(&byte, 1);
  }
  CHECK_THROWS_AS(NnModel::load(path), FormatError);
  std::remove(path.c_str());
  std::remove((path + ".json").c_str());

  CHECK_THROWS_AS(NnModel::load("does-not-exist.pann"), IoError);
}

TEST_CASE("training data builders resample deterministically") {
  NnConfig config;
  config.window = 3;
  config.proj_dim = 4;
  config.hidden_dim = 4;
  config.seed = 9;
  config.resample_rate = 0.5;
  auto tokens = tokens_with_unk({"u1", "u2", "u3"});
  NnModel m = NnModel::init(NnKind::kLanguageModel, config, tokens, tokens);
  std::string corpus = "u1 u2 u3\nu2 u2\nu3 u1 u1 u2\nu1\nu2 u3\n";
  auto run = [&]() {
    std::istringstream in(corpus);
    StreamLineSource lines(in);
    return lm_examples_from_corpus(m, lines);
  };
  auto a = run();
  auto b = run();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].slots == b[i].slots);
    CHECK(a[i].target == b[i].target);
  }
  // Higher keep-rate yields at least as many examples.
  NnConfig full_config = config;
  full_config.resample_rate = 1.0;
  NnModel full = NnModel::init(NnKind::kLanguageModel, full_config, tokens, tokens);
  std::istringstream in(corpus);
  StreamLineSource lines(in);
  CHECK(lm_examples_from_corpus(full, lines).size() >= a.size());
}
