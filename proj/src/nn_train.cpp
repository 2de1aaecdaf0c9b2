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

#include "phraseadapt/nn_train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_set>

#include "phraseadapt/errors.hpp"
#include "phraseadapt/phrase_table.hpp"

namespace phraseadapt {

namespace {

struct ForwardState {
  std::vector<double> hidden;  // tanh activations
  std::vector<double> dist;    // softmax probabilities
};

ForwardState run_forward(const NnModel& model, const NnExample& example) {
  ForwardState st;
  std::size_t slots_n = model.input_slots();
  std::size_t proj_dim = model.config().proj_dim;
  std::size_t hidden = model.config().hidden_dim;
  std::size_t in_dim = slots_n * proj_dim;
  std::size_t out = model.output_vocab();
  std::span<const double> params = model.parameters();
  const double* P = params.data() + model.proj_offset();
  const double* HW = params.data() + model.hidden_w_offset();
  const double* HB = params.data() + model.hidden_b_offset();
  const double* OW = params.data() + model.output_w_offset();
  const double* OB = params.data() + model.output_b_offset();

  st.hidden.resize(hidden);
  for (std::size_t j = 0; j < hidden; ++j) {
    double acc = HB[j];
    const double* wrow = HW + j * in_dim;
    for (std::size_t s = 0; s < slots_n; ++s) {
      std::int32_t word = example.slots[s];
      if (word == kNoWord) continue;
      const double* pr = P + static_cast<std::size_t>(word) * proj_dim;
      const double* w = wrow + s * proj_dim;
      double dot = 0.0;
      for (std::size_t d = 0; d < proj_dim; ++d) dot += w[d] * pr[d];
      acc += dot;
    }
    st.hidden[j] = std::tanh(acc);
  }

  st.dist.resize(out);
  double max_logit = -HUGE_VAL;
  for (std::size_t o = 0; o < out; ++o) {
    double acc = OB[o];
    const double* w = OW + o * hidden;
    for (std::size_t j = 0; j < hidden; ++j) acc += w[j] * st.hidden[j];
    st.dist[o] = acc;
    if (acc > max_logit) max_logit = acc;
  }
  double z = 0.0;
  for (double& v : st.dist) {
    v = std::exp(v - max_logit);
    z += v;
  }
  for (double& v : st.dist) v /= z;
  return st;
}

void validate_example(const NnModel& model, const NnExample& example) {
  if (example.slots.size() != model.input_slots())
    throw InputError("example slot count does not match the model window");
  for (std::int32_t w : example.slots)
    if (w != kNoWord && (w < 0 || w >= static_cast<std::int32_t>(model.input_vocab())))
      throw InputError("example input id out of range");
  if (example.target < 0 ||
      example.target >= static_cast<std::int32_t>(model.output_vocab()))
    throw InputError("example target id out of range");
}

}  // namespace

double example_loss(const NnModel& model, const NnExample& example) {
  validate_example(model, example);
  ForwardState st = run_forward(model, example);
  double p = st.dist[static_cast<std::size_t>(example.target)];
  return -std::log(std::max(p, 1e-300));
}

double accumulate_gradient(const NnModel& model, const NnExample& example,
                           std::span<double> grad) {
  validate_example(model, example);
  if (grad.size() != model.parameter_count())
    throw InputError("gradient buffer size mismatch");
  ForwardState st = run_forward(model, example);

  std::size_t slots_n = model.input_slots();
  std::size_t proj_dim = model.config().proj_dim;
  std::size_t hidden = model.config().hidden_dim;
  std::size_t in_dim = slots_n * proj_dim;
  std::size_t out = model.output_vocab();
  std::span<const double> params = model.parameters();
  const double* P = params.data() + model.proj_offset();
  const double* HW = params.data() + model.hidden_w_offset();
  const double* OW = params.data() + model.output_w_offset();
  double* gP = grad.data() + model.proj_offset();
  double* gHW = grad.data() + model.hidden_w_offset();
  double* gHB = grad.data() + model.hidden_b_offset();
  double* gOW = grad.data() + model.output_w_offset();
  double* gOB = grad.data() + model.output_b_offset();

  // Softmax cross-entropy: dLogit = p - onehot(target).
  std::vector<double> dhidden(hidden, 0.0);
  for (std::size_t o = 0; o < out; ++o) {
    double dlogit = st.dist[o] - (static_cast<std::int32_t>(o) == example.target);
    gOB[o] += dlogit;
    double* gw = gOW + o * hidden;
    const double* w = OW + o * hidden;
    for (std::size_t j = 0; j < hidden; ++j) {
      gw[j] += dlogit * st.hidden[j];
      dhidden[j] += dlogit * w[j];
    }
  }

  for (std::size_t j = 0; j < hidden; ++j) {
    double dpre = dhidden[j] * (1.0 - st.hidden[j] * st.hidden[j]);
    gHB[j] += dpre;
    double* gwrow = gHW + j * in_dim;
    const double* wrow = HW + j * in_dim;
    for (std::size_t s = 0; s < slots_n; ++s) {
      std::int32_t word = example.slots[s];
      if (word == kNoWord) continue;  // zero projection: no gradient flows
      const double* pr = P + static_cast<std::size_t>(word) * proj_dim;
      double* gpr = gP + static_cast<std::size_t>(word) * proj_dim;
      double* gw = gwrow + s * proj_dim;
      const double* w = wrow + s * proj_dim;
      for (std::size_t d = 0; d < proj_dim; ++d) {
        gw[d] += dpre * pr[d];
        gpr[d] += dpre * w[d];
      }
    }
  }

  double p = st.dist[static_cast<std::size_t>(example.target)];
  return -std::log(std::max(p, 1e-300));
}

TrainResult train(NnModel& model, std::span<const NnExample> examples) {
  const NnConfig& cfg = model.config();
  TrainResult result;
  if (cfg.epochs == 0 || examples.empty()) return result;
  for (const NnExample& ex : examples) validate_example(model, ex);

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grad(model.parameter_count(), 0.0);
  std::span<double> params = model.parameters();

  for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::mt19937_64 shuffle_rng(cfg.seed * 0x9e3779b97f4a7c15ull + epoch + 1);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = 0.0;
      for (std::size_t i = start; i < end; ++i)
        batch_loss += accumulate_gradient(model, examples[order[i]], grad);
      double scale = cfg.learning_rate / static_cast<double>(end - start);
      for (std::size_t i = 0; i < params.size(); ++i) params[i] -= scale * grad[i];
      if (!std::isfinite(batch_loss))
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch + 1) +
                             ", batch " + std::to_string(batch_index + 1));
      epoch_loss += batch_loss;
      ++batch_index;
    }
    result.epoch_loss.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  return result;
}

double numeric_gradient(NnModel& model, const NnExample& example,
                        std::size_t param_index, double epsilon) {
  std::span<double> params = model.parameters();
  if (param_index >= params.size()) throw InputError("parameter index out of range");
  double saved = params[param_index];
  params[param_index] = saved + epsilon;
  double up = example_loss(model, example);
  params[param_index] = saved - epsilon;
  double down = example_loss(model, example);
  params[param_index] = saved;
  return (up - down) / (2.0 * epsilon);
}

GradientCheckResult gradient_check(NnModel& model, const NnExample& example,
                                   double epsilon, std::uint64_t seed,
                                   std::size_t num_params) {
  if (epsilon < 1e-6 || epsilon > 1e-3)
    throw InputError("gradient_check epsilon must be in [1e-6, 1e-3]");
  std::vector<double> grad(model.parameter_count(), 0.0);
  accumulate_gradient(model, example, grad);

  std::vector<std::size_t> indices;
  // One informative parameter per layer, then seeded uniform picks.
  std::size_t proj_dim = model.config().proj_dim;
  for (std::int32_t w : example.slots) {
    if (w == kNoWord) continue;
    indices.push_back(model.proj_offset() + static_cast<std::size_t>(w) * proj_dim);
    break;
  }
  indices.push_back(model.hidden_w_offset());
  indices.push_back(model.hidden_b_offset());
  indices.push_back(model.output_w_offset() +
                    static_cast<std::size_t>(example.target) * model.config().hidden_dim);
  indices.push_back(model.output_b_offset() + static_cast<std::size_t>(example.target));
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, model.parameter_count() - 1);
  while (indices.size() < num_params) indices.push_back(pick(rng));
  std::sort(indices.begin(), indices.end());
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());

  GradientCheckResult result;
  for (std::size_t idx : indices) {
    double analytic = grad[idx];
    double numeric = numeric_gradient(model, example, idx, epsilon);
    double diff = std::abs(analytic - numeric);
    double err = diff <= 1e-8 ? 0.0 : diff / std::max(std::abs(analytic), std::abs(numeric));
    result.max_rel_error = std::max(result.max_rel_error, err);
  }
  result.params_checked = indices.size();
  return result;
}

PtVocabLists collect_pt_vocab(LineSource& table) {
  PtVocabLists lists;
  lists.source.emplace_back(kUnkToken);
  lists.target.emplace_back(kUnkToken);
  std::unordered_set<std::string> src_seen{std::string(kUnkToken)};
  std::unordered_set<std::string> tgt_seen{std::string(kUnkToken)};
  std::string line;
  while (table.next(&line)) {
    std::vector<std::string_view> fields = split_fields(line);
    if (fields.size() < 2)
      throw FormatError("expected a phrase-table line", table.line_number());
    auto add_side = [](std::string_view field, std::unordered_set<std::string>& seen,
                       std::vector<std::string>& out) {
      std::size_t i = 0;
      while (i < field.size()) {
        while (i < field.size() && (field[i] == ' ' || field[i] == '\t')) ++i;
        std::size_t start = i;
        while (i < field.size() && field[i] != ' ' && field[i] != '\t') ++i;
        if (i > start) {
          std::string token(field.substr(start, i - start));
          if (seen.insert(token).second) out.push_back(std::move(token));
        }
      }
    };
    add_side(fields[0], src_seen, lists.source);
    add_side(fields[1], tgt_seen, lists.target);
  }
  return lists;
}

std::vector<std::string> collect_corpus_vocab(LineSource& corpus) {
  std::vector<std::string> tokens;
  tokens.emplace_back(kUnkToken);
  std::unordered_set<std::string> seen{std::string(kUnkToken)};
  std::string line;
  while (corpus.next(&line)) {
    std::string_view rest = line;
    std::size_t i = 0;
    while (i < rest.size()) {
      while (i < rest.size() && std::isspace(static_cast<unsigned char>(rest[i]))) ++i;
      std::size_t start = i;
      while (i < rest.size() && !std::isspace(static_cast<unsigned char>(rest[i]))) ++i;
      if (i > start) {
        std::string token(rest.substr(start, i - start));
        if (seen.insert(token).second) tokens.push_back(std::move(token));
      }
    }
  }
  return tokens;
}

namespace {

// Separate stream from the shuffle schedule so resampling and training stay
// independently reproducible.
std::mt19937_64 resample_rng(const NnConfig& cfg) {
  return std::mt19937_64(cfg.seed ^ 0xc2b2ae3d27d4eb4full);
}

std::vector<std::string_view> split_tokens(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t start = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

}  // namespace

std::vector<NnExample> translation_examples_from_table(const NnModel& model,
                                                       LineSource& table) {
  if (model.kind() != NnKind::kTranslation)
    throw InputError("translation examples need a translation model");
  std::vector<NnExample> examples;
  std::mt19937_64 rng = resample_rng(model.config());
  std::bernoulli_distribution keep(model.config().resample_rate);
  std::string line;
  while (table.next(&line)) {
    std::vector<std::string_view> fields = split_fields(line);
    if (fields.size() < 2)
      throw FormatError("expected a phrase-table line", table.line_number());
    bool kept = model.config().resample_rate >= 1.0 || keep(rng);
    if (!kept) continue;
    std::vector<std::string_view> src = split_tokens(fields[0]);
    std::vector<std::string_view> tgt = split_tokens(fields[1]);
    if (src.empty() || tgt.empty())
      throw FormatError("empty phrase in training entry", table.line_number());
    std::vector<std::int32_t> words;
    words.reserve(src.size());
    for (std::string_view t : src) words.push_back(model.input_id(t));
    NnExample base;
    base.slots.resize(model.input_slots());
    model.fill_slots(words, base.slots);
    for (std::string_view t : tgt) {
      NnExample ex = base;
      ex.target = model.output_id(t);
      examples.push_back(std::move(ex));
    }
  }
  return examples;
}

std::vector<NnExample> lm_examples_from_corpus(const NnModel& model,
                                               LineSource& corpus) {
  if (model.kind() != NnKind::kLanguageModel)
    throw InputError("LM examples need a language-model net");
  std::vector<NnExample> examples;
  std::mt19937_64 rng = resample_rng(model.config());
  std::bernoulli_distribution keep(model.config().resample_rate);
  std::string line;
  while (corpus.next(&line)) {
    std::vector<std::string_view> tokens = split_tokens(line);
    if (tokens.empty()) continue;
    bool kept = model.config().resample_rate >= 1.0 || keep(rng);
    if (!kept) continue;
    std::vector<std::int32_t> words;
    words.reserve(tokens.size());
    for (std::string_view t : tokens) words.push_back(model.input_id(t));
    for (std::size_t k = 0; k < tokens.size(); ++k) {
      NnExample ex;
      ex.slots.resize(model.input_slots());
      model.fill_slots(std::span<const std::int32_t>(words.data(), k), ex.slots);
      ex.target = model.output_id(tokens[k]);
      examples.push_back(std::move(ex));
    }
  }
  return examples;
}

}  // namespace phraseadapt
