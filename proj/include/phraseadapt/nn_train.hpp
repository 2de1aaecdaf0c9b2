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
// Cross-entropy minibatch SGD for the feed-forward scorer, plus the
// finite-difference machinery that keeps the backprop honest and the
// example/vocabulary builders used by the training tools.

#ifndef PHRASEADAPT_NN_TRAIN_HPP_
#define PHRASEADAPT_NN_TRAIN_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "phraseadapt/io.hpp"
#include "phraseadapt/nn_model.hpp"

namespace phraseadapt {

// One supervised example: a padded slot vector and the output word to
// predict.  Slots use model-local input ids, kNoWord for empty positions.
struct NnExample {
  std::vector<std::int32_t> slots;
  std::int32_t target = 0;
};

struct TrainResult {
  std::vector<double> epoch_loss;  // average nats per example
};

// Minibatch SGD on cross-entropy, fixed epoch count, deterministic shuffle
// schedule derived from config.seed.  Throws NumericalError (with epoch and
// batch) if the loss turns non-finite.
TrainResult train(NnModel& model, std::span<const NnExample> examples);

// Cross-entropy (nats) of one example under the current parameters.
double example_loss(const NnModel& model, const NnExample& example);

// Adds d(loss)/d(theta) for one example into `grad` (dense, parameter-count
// sized) and returns the example loss.
double accumulate_gradient(const NnModel& model, const NnExample& example,
                           std::span<double> grad);

// Central finite difference of example_loss w.r.t. one parameter.
double numeric_gradient(NnModel& model, const NnExample& example,
                        std::size_t param_index, double epsilon);

struct GradientCheckResult {
  double max_rel_error = 0.0;   // 0 for parameters matched within 1e-8 absolute
  std::size_t params_checked = 0;
};

// Compares analytic and central-difference gradients on >= `num_params`
// seeded random parameters (always covering every layer).  Relative error
// uses max(|analytic|, |numeric|) as the denominator; disagreements within
// 1e-8 absolute count as exact so dead units cannot dominate.
GradientCheckResult gradient_check(NnModel& model, const NnExample& example,
                                   double epsilon, std::uint64_t seed,
                                   std::size_t num_params = 24);

// --- data preparation ------------------------------------------------------

// First-seen-order token lists (with <unk> prepended) from training data.
struct PtVocabLists {
  std::vector<std::string> source;
  std::vector<std::string> target;
};
PtVocabLists collect_pt_vocab(LineSource& table);
std::vector<std::string> collect_corpus_vocab(LineSource& corpus);

// One example per target word of each phrase pair: slots = source phrase.
// Entries are kept with probability config.resample_rate (seeded Bernoulli).
std::vector<NnExample> translation_examples_from_table(const NnModel& model,
                                                       LineSource& table);

// One example per token of each corpus line: slots = preceding history.
// Sentences are resampled the same way.
std::vector<NnExample> lm_examples_from_corpus(const NnModel& model,
                                               LineSource& corpus);

}  // namespace phraseadapt

#endif  // PHRASEADAPT_NN_TRAIN_HPP_
