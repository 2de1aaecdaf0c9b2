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
// From-scratch feed-forward scorer over a fixed window of input words:
// shared per-word projection -> tanh hidden layer -> softmax over the
// target vocabulary.  Two flavours share the architecture:
//   - translation: slots hold the source phrase (window slots), one shared
//     forward pass scores every target word (no target-word dependence);
//   - language model: slots hold the preceding window-1 words, one forward
//     pass per position.
// Words beyond the input get zero projections; per-phrase scores are
// length-normalized geometric means of the per-word probabilities.

#ifndef PHRASEADAPT_NN_MODEL_HPP_
#define PHRASEADAPT_NN_MODEL_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "phraseadapt/phrase_table.hpp"
#include "phraseadapt/vocab.hpp"

namespace phraseadapt {

// Slot value marking a position with no word (projection is all zeros).
inline constexpr std::int32_t kNoWord = -1;
// Probabilities are floored before entering the geometric mean.
inline constexpr double kProbFloor = 1e-12;

enum class NnKind : std::uint32_t { kTranslation = 0, kLanguageModel = 1 };

struct NnConfig {
  std::uint32_t window = 7;       // max source words / LM window
  std::uint32_t proj_dim = 16;    // per-word projection (paper scale: 320)
  std::uint32_t hidden_dim = 32;  // tanh layer (paper scale: 512)
  std::uint64_t seed = 1;
  double learning_rate = 0.1;
  std::uint32_t epochs = 5;
  std::uint32_t batch_size = 16;
  double resample_rate = 1.0;     // Bernoulli keep-rate for training units

  void validate() const;
};

class NnModel {
 public:
  NnModel() = default;
  // Glorot-uniform weights, zero biases, deterministic in config.seed.
  static NnModel init(NnKind kind, const NnConfig& config,
                      std::vector<std::string> input_tokens,
                      std::vector<std::string> output_tokens);

  NnKind kind() const { return kind_; }
  const NnConfig& config() const { return config_; }
  // Translation nets read `window` slots, LM nets the preceding window-1.
  std::uint32_t input_slots() const;
  std::uint32_t input_vocab() const { return static_cast<std::uint32_t>(input_tokens_.size()); }
  std::uint32_t output_vocab() const { return static_cast<std::uint32_t>(output_tokens_.size()); }
  const std::vector<std::string>& input_tokens() const { return input_tokens_; }
  const std::vector<std::string>& output_tokens() const { return output_tokens_; }

  // Model-local ids; unknown tokens map to <unk> (id 0).
  std::int32_t input_id(std::string_view token) const;
  std::int32_t output_id(std::string_view token) const;

  // Fills `slots` (size input_slots()) from a word sequence: translation
  // nets truncate to the first window words, LM nets take the last
  // input_slots() words of the history; short inputs leave kNoWord.
  void fill_slots(std::span<const std::int32_t> words,
                  std::span<std::int32_t> slots) const;

  // Softmax distribution over the output vocabulary for one slot vector.
  std::vector<double> forward(std::span<const std::int32_t> slots) const;

  // Parameters, flattened in a fixed order (projection, hidden W, hidden b,
  // output W, output b).  Exposed for training, checking and serialization.
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  std::size_t parameter_count() const { return params_.size(); }

  // Layout offsets into parameters().
  std::size_t proj_offset() const { return 0; }
  std::size_t hidden_w_offset() const { return hw_off_; }
  std::size_t hidden_b_offset() const { return hb_off_; }
  std::size_t output_w_offset() const { return ow_off_; }
  std::size_t output_b_offset() const { return ob_off_; }

  void save(const std::string& path) const;  // binary container + JSON sidecar
  static NnModel load(const std::string& path);

  bool same_vocabulary(const NnModel& other) const;

 private:
  friend struct NnForwardScratch;
  NnKind kind_ = NnKind::kTranslation;
  NnConfig config_;
  std::vector<std::string> input_tokens_;
  std::vector<std::string> output_tokens_;
  std::unordered_map<std::string, std::int32_t> input_ids_;
  std::unordered_map<std::string, std::int32_t> output_ids_;
  std::vector<double> params_;
  std::size_t hw_off_ = 0, hb_off_ = 0, ow_off_ = 0, ob_off_ = 0;

  void index_vocabs();
  void layout();
};

// Geometric-mean translation score Q(E|F): all target-word probabilities are
// read from one shared forward pass over the source slots.
double q_score(const NnModel& model, const Vocab& vocab, const PhrasePair& pair,
               std::uint64_t* floored_terms = nullptr);
double q_score_tokens(const NnModel& model,
                      std::span<const std::string_view> src_tokens,
                      std::span<const std::string_view> tgt_tokens,
                      std::uint64_t* floored_terms = nullptr);

// Geometric-mean LM score Q(E): each word is predicted from its preceding
// window-1 words, zero-padded.
double q_score_lm(const NnModel& model, const Vocab& vocab, const Phrase& phrase,
                  std::uint64_t* floored_terms = nullptr);
double q_score_lm_tokens(const NnModel& model,
                         std::span<const std::string_view> tokens,
                         std::uint64_t* floored_terms = nullptr);

// Q_in - Q_out.  Models must agree in kind and vocabularies.
double d_minus(const NnModel& model_in, const NnModel& model_out,
               const Vocab& vocab, const PhrasePair& pair);
double d_minus_lm(const NnModel& model_in, const NnModel& model_out,
                  const Vocab& vocab, const Phrase& phrase);

}  // namespace phraseadapt

#endif  // PHRASEADAPT_NN_MODEL_HPP_
