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

#include "phraseadapt/nn_model.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "phraseadapt/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "model container I/O assumes a little-endian host");

namespace phraseadapt {

void NnConfig::validate() const {
  if (window < 1) throw InputError("window must be >= 1");
  if (proj_dim < 1) throw InputError("proj_dim must be >= 1");
  if (hidden_dim < 1) throw InputError("hidden_dim must be >= 1");
  if (!(learning_rate > 0.0)) throw InputError("learning_rate must be > 0");
  if (batch_size < 1) throw InputError("batch_size must be >= 1");
  if (!(resample_rate > 0.0) || resample_rate > 1.0)
    throw InputError("resample_rate must be in (0, 1]");
}

std::uint32_t NnModel::input_slots() const {
  if (kind_ == NnKind::kTranslation) return config_.window;
  return config_.window > 1 ? config_.window - 1 : 1;
}

void NnModel::index_vocabs() {
  input_ids_.clear();
  output_ids_.clear();
  for (std::size_t i = 0; i < input_tokens_.size(); ++i)
    input_ids_.emplace(input_tokens_[i], static_cast<std::int32_t>(i));
  for (std::size_t i = 0; i < output_tokens_.size(); ++i)
    output_ids_.emplace(output_tokens_[i], static_cast<std::int32_t>(i));
}

void NnModel::layout() {
  std::size_t slots = input_slots();
  std::size_t proj = static_cast<std::size_t>(input_tokens_.size()) * config_.proj_dim;
  std::size_t hw = slots * config_.proj_dim * static_cast<std::size_t>(config_.hidden_dim);
  std::size_t hb = config_.hidden_dim;
  std::size_t ow = static_cast<std::size_t>(config_.hidden_dim) * output_tokens_.size();
  std::size_t ob = output_tokens_.size();
  hw_off_ = proj;
  hb_off_ = hw_off_ + hw;
  ow_off_ = hb_off_ + hb;
  ob_off_ = ow_off_ + ow;
  params_.assign(ob_off_ + ob, 0.0);
}

NnModel NnModel::init(NnKind kind, const NnConfig& config,
                      std::vector<std::string> input_tokens,
                      std::vector<std::string> output_tokens) {
  config.validate();
  if (input_tokens.empty() || output_tokens.empty())
    throw InputError("model vocabularies must be non-empty");
  if (input_tokens[0] != kUnkToken || output_tokens[0] != kUnkToken)
    throw InputError("model vocabularies must start with <unk>");
  NnModel m;
  m.kind_ = kind;
  m.config_ = config;
  m.input_tokens_ = std::move(input_tokens);
  m.output_tokens_ = std::move(output_tokens);
  m.index_vocabs();
  m.layout();

  // Weight matrices get Glorot-uniform draws in a fixed order; biases stay 0.
  std::mt19937_64 rng(config.seed);
  auto glorot = [&rng](std::span<double> w, std::size_t fan_in, std::size_t fan_out) {
    double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& x : w) x = dist(rng);
  };
  std::span<double> p = m.params_;
  std::size_t in_dim = static_cast<std::size_t>(m.input_slots()) * config.proj_dim;
  glorot(p.subspan(m.proj_offset(), m.hw_off_ - 0), m.input_tokens_.size(),
         config.proj_dim);
  glorot(p.subspan(m.hw_off_, m.hb_off_ - m.hw_off_), in_dim, config.hidden_dim);
  glorot(p.subspan(m.ow_off_, m.ob_off_ - m.ow_off_), config.hidden_dim,
         m.output_tokens_.size());
  return m;
}

std::int32_t NnModel::input_id(std::string_view token) const {
  auto it = input_ids_.find(std::string(token));
  return it == input_ids_.end() ? 0 : it->second;
}

std::int32_t NnModel::output_id(std::string_view token) const {
  auto it = output_ids_.find(std::string(token));
  return it == output_ids_.end() ? 0 : it->second;
}

void NnModel::fill_slots(std::span<const std::int32_t> words,
                         std::span<std::int32_t> slots) const {
  std::size_t s = input_slots();
  if (slots.size() != s) throw InputError("slot buffer size mismatch");
  std::fill(slots.begin(), slots.end(), kNoWord);
  if (kind_ == NnKind::kTranslation) {
    // first `window` source words, short phrases leave trailing slots empty
    std::size_t n = std::min(words.size(), s);
    for (std::size_t i = 0; i < n; ++i) slots[i] = words[i];
  } else {
    // last `window-1` history words, right-aligned so the most recent word
    // always lands in the final slot
    std::size_t n = std::min(words.size(), s);
    for (std::size_t j = 0; j < n; ++j)
      slots[s - 1 - j] = words[words.size() - 1 - j];
  }
}

std::vector<double> NnModel::forward(std::span<const std::int32_t> slots) const {
  std::size_t s = input_slots();
  if (slots.size() != s) throw InputError("slot count mismatch");
  std::size_t proj_dim = config_.proj_dim;
  std::size_t hidden = config_.hidden_dim;
  std::size_t in_dim = s * proj_dim;
  std::size_t out = output_tokens_.size();
  const double* P = params_.data() + proj_offset();
  const double* HW = params_.data() + hw_off_;
  const double* HB = params_.data() + hb_off_;
  const double* OW = params_.data() + ow_off_;
  const double* OB = params_.data() + ob_off_;

  // Hidden pre-activation; missing slots contribute nothing (zero projection).
  std::vector<double> h(hidden);
  for (std::size_t j = 0; j < hidden; ++j) {
    double acc = HB[j];
    const double* wrow = HW + j * in_dim;
    for (std::size_t slot = 0; slot < s; ++slot) {
      std::int32_t word = slots[slot];
      if (word == kNoWord) continue;
      const double* pr = P + static_cast<std::size_t>(word) * proj_dim;
      const double* w = wrow + slot * proj_dim;
      double dot = 0.0;
      for (std::size_t d = 0; d < proj_dim; ++d) dot += w[d] * pr[d];
      acc += dot;
    }
    h[j] = std::tanh(acc);
  }

  std::vector<double> dist(out);
  double max_logit = -HUGE_VAL;
  for (std::size_t o = 0; o < out; ++o) {
    double acc = OB[o];
    const double* w = OW + o * hidden;
    for (std::size_t j = 0; j < hidden; ++j) acc += w[j] * h[j];
    dist[o] = acc;
    if (acc > max_logit) max_logit = acc;
  }
  double z = 0.0;
  for (double& v : dist) {
    v = std::exp(v - max_logit);
    z += v;
  }
  for (double& v : dist) v /= z;
  return dist;
}

bool NnModel::same_vocabulary(const NnModel& other) const {
  return input_tokens_ == other.input_tokens_ && output_tokens_ == other.output_tokens_;
}

namespace {

constexpr std::uint32_t kMagic = 0x4e4e4150;  // "PANN" little-endian
constexpr std::uint32_t kVersion = 1;

void write_bytes(std::ofstream& out, const void* data, std::size_t n,
                 std::uint32_t* crc) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  *crc = static_cast<std::uint32_t>(
      crc32(*crc, static_cast<const Bytef*>(data), static_cast<uInt>(n)));
}

template <typename T>
void write_pod(std::ofstream& out, T value, std::uint32_t* crc) {
  write_bytes(out, &value, sizeof(T), crc);
}

void write_vocab(std::ofstream& out, const std::vector<std::string>& tokens,
                 std::uint32_t* crc) {
  write_pod(out, static_cast<std::uint32_t>(tokens.size()), crc);
  for (const std::string& t : tokens) {
    write_pod(out, static_cast<std::uint32_t>(t.size()), crc);
    write_bytes(out, t.data(), t.size(), crc);
  }
}

void read_bytes(std::ifstream& in, void* data, std::size_t n, std::uint32_t* crc) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (!in) throw FormatError("truncated model container");
  *crc = static_cast<std::uint32_t>(
      crc32(*crc, static_cast<const Bytef*>(data), static_cast<uInt>(n)));
}

template <typename T>
T read_pod(std::ifstream& in, std::uint32_t* crc) {
  T value;
  read_bytes(in, &value, sizeof(T), crc);
  return value;
}

std::vector<std::string> read_vocab(std::ifstream& in, std::uint32_t* crc) {
  std::uint32_t n = read_pod<std::uint32_t>(in, crc);
  if (n > (1u << 26)) throw FormatError("implausible vocabulary size in container");
  std::vector<std::string> tokens(n);
  for (std::string& t : tokens) {
    std::uint32_t len = read_pod<std::uint32_t>(in, crc);
    if (len > (1u << 20)) throw FormatError("implausible token length in container");
    t.resize(len);
    read_bytes(in, t.data(), len, crc);
  }
  return tokens;
}

}  // namespace

void NnModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  std::uint32_t crc = static_cast<std::uint32_t>(crc32(0L, Z_NULL, 0));
  std::uint32_t dummy = 0;
  write_pod(out, kMagic, &dummy);
  write_pod(out, kVersion, &dummy);
  write_pod(out, static_cast<std::uint32_t>(kind_), &crc);
  write_pod(out, config_.window, &crc);
  write_pod(out, config_.proj_dim, &crc);
  write_pod(out, config_.hidden_dim, &crc);
  write_pod(out, config_.seed, &crc);
  write_pod(out, config_.learning_rate, &crc);
  write_pod(out, config_.epochs, &crc);
  write_pod(out, config_.batch_size, &crc);
  write_pod(out, config_.resample_rate, &crc);
  write_vocab(out, input_tokens_, &crc);
  write_vocab(out, output_tokens_, &crc);
  write_pod(out, static_cast<std::uint64_t>(params_.size()), &crc);
  write_bytes(out, params_.data(), params_.size() * sizeof(double), &crc);
  write_pod(out, crc, &dummy);
  out.close();
  if (!out) throw IoError("write failure on " + path);

  nlohmann::json sidecar{
      {"kind", kind_ == NnKind::kTranslation ? "translation" : "language_model"},
      {"window", config_.window},
      {"proj_dim", config_.proj_dim},
      {"hidden_dim", config_.hidden_dim},
      {"input_vocab", input_tokens_.size()},
      {"output_vocab", output_tokens_.size()},
      {"seed", config_.seed},
      {"learning_rate", config_.learning_rate},
      {"epochs", config_.epochs},
      {"batch_size", config_.batch_size},
      {"resample_rate", config_.resample_rate},
      {"parameters", params_.size()},
  };
  std::ofstream side(path + ".json", std::ios::trunc);
  side << sidecar.dump(2) << "\n";
}

NnModel NnModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::uint32_t crc = static_cast<std::uint32_t>(crc32(0L, Z_NULL, 0));
  std::uint32_t dummy = 0;
  if (read_pod<std::uint32_t>(in, &dummy) != kMagic)
    throw FormatError(path + " is not a model container (bad magic)");
  std::uint32_t version = read_pod<std::uint32_t>(in, &dummy);
  if (version != kVersion)
    throw FormatError("unsupported model container version " + std::to_string(version));
  NnModel m;
  m.kind_ = static_cast<NnKind>(read_pod<std::uint32_t>(in, &crc));
  m.config_.window = read_pod<std::uint32_t>(in, &crc);
  m.config_.proj_dim = read_pod<std::uint32_t>(in, &crc);
  m.config_.hidden_dim = read_pod<std::uint32_t>(in, &crc);
  m.config_.seed = read_pod<std::uint64_t>(in, &crc);
  m.config_.learning_rate = read_pod<double>(in, &crc);
  m.config_.epochs = read_pod<std::uint32_t>(in, &crc);
  m.config_.batch_size = read_pod<std::uint32_t>(in, &crc);
  m.config_.resample_rate = read_pod<double>(in, &crc);
  m.input_tokens_ = read_vocab(in, &crc);
  m.output_tokens_ = read_vocab(in, &crc);
  std::uint64_t n_params = read_pod<std::uint64_t>(in, &crc);
  m.index_vocabs();
  m.layout();
  if (n_params != m.params_.size())
    throw FormatError("parameter count mismatch in " + path);
  read_bytes(in, m.params_.data(), m.params_.size() * sizeof(double), &crc);
  std::uint32_t stored = read_pod<std::uint32_t>(in, &dummy);
  if (stored != crc)
    throw FormatError("checksum mismatch in " + path + " (corrupt container)");
  return m;
}

namespace {

double geometric_mean_prob(std::vector<double> probs, std::uint64_t* floored_terms) {
  std::uint64_t floored = 0;
  for (double& p : probs) {
    if (p < kProbFloor) {
      p = kProbFloor;
      ++floored;
    }
  }
  if (floored_terms != nullptr) *floored_terms += floored;
  if (probs.size() == 1) return probs[0];  // degenerate mean, kept exact
  // Fixed summation order makes the score exactly invariant under
  // permutations of the target words.
  std::sort(probs.begin(), probs.end());
  double log_sum = 0.0;
  for (double p : probs) log_sum += std::log(p);
  return std::exp(log_sum / static_cast<double>(probs.size()));
}

}  // namespace

double q_score_tokens(const NnModel& model, std::span<const std::string_view> src_tokens,
                      std::span<const std::string_view> tgt_tokens,
                      std::uint64_t* floored_terms) {
  if (model.kind() != NnKind::kTranslation)
    throw InputError("q_score requires a translation model");
  if (tgt_tokens.empty()) throw InputError("target phrase must be non-empty");
  std::vector<std::int32_t> words;
  words.reserve(src_tokens.size());
  for (std::string_view t : src_tokens) words.push_back(model.input_id(t));
  std::vector<std::int32_t> slots(model.input_slots());
  model.fill_slots(words, slots);
  std::vector<double> dist = model.forward(slots);
  std::vector<double> probs;
  probs.reserve(tgt_tokens.size());
  for (std::string_view t : tgt_tokens)
    probs.push_back(dist[static_cast<std::size_t>(model.output_id(t))]);
  return geometric_mean_prob(std::move(probs), floored_terms);
}

double q_score(const NnModel& model, const Vocab& vocab, const PhrasePair& pair,
               std::uint64_t* floored_terms) {
  std::vector<std::string_view> src, tgt;
  src.reserve(pair.src.ids.size());
  tgt.reserve(pair.tgt.ids.size());
  for (TokenId id : pair.src.ids) src.push_back(vocab.resolve(id));
  for (TokenId id : pair.tgt.ids) tgt.push_back(vocab.resolve(id));
  return q_score_tokens(model, src, tgt, floored_terms);
}

double q_score_lm_tokens(const NnModel& model, std::span<const std::string_view> tokens,
                         std::uint64_t* floored_terms) {
  if (model.kind() != NnKind::kLanguageModel)
    throw InputError("q_score_lm requires a language-model net");
  if (tokens.empty()) throw InputError("phrase must be non-empty");
  std::vector<std::int32_t> words;
  words.reserve(tokens.size());
  for (std::string_view t : tokens) words.push_back(model.input_id(t));
  std::vector<std::int32_t> slots(model.input_slots());
  std::vector<double> probs;
  probs.reserve(tokens.size());
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    model.fill_slots(std::span<const std::int32_t>(words.data(), k), slots);
    std::vector<double> dist = model.forward(slots);
    // output id of the predicted word; LM nets share one token space but the
    // output vocabulary is what the softmax ranges over
    std::int32_t target = model.output_id(tokens[k]);
    probs.push_back(dist[static_cast<std::size_t>(target)]);
  }
  return geometric_mean_prob(std::move(probs), floored_terms);
}

double q_score_lm(const NnModel& model, const Vocab& vocab, const Phrase& phrase,
                  std::uint64_t* floored_terms) {
  std::vector<std::string_view> tokens;
  tokens.reserve(phrase.ids.size());
  for (TokenId id : phrase.ids) tokens.push_back(vocab.resolve(id));
  return q_score_lm_tokens(model, tokens, floored_terms);
}

namespace {

void check_comparable(const NnModel& a, const NnModel& b) {
  if (a.kind() != b.kind())
    throw InputError("d_minus: model kinds differ");
  if (!a.same_vocabulary(b))
    throw InputError("d_minus: models do not share vocabularies");
}

}  // namespace

double d_minus(const NnModel& model_in, const NnModel& model_out, const Vocab& vocab,
               const PhrasePair& pair) {
  check_comparable(model_in, model_out);
  return q_score(model_in, vocab, pair) - q_score(model_out, vocab, pair);
}

double d_minus_lm(const NnModel& model_in, const NnModel& model_out, const Vocab& vocab,
                  const Phrase& phrase) {
  check_comparable(model_in, model_out);
  return q_score_lm(model_in, vocab, phrase) - q_score_lm(model_out, vocab, phrase);
}

}  // namespace phraseadapt
