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

#include "phraseadapt/ngram_lm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "phraseadapt/errors.hpp"
#include "phraseadapt/numeric.hpp"

namespace phraseadapt {

NgramLm::NgramLm(int order) : order_(order) {
  if (order < 1) throw InputError("LM order must be >= 1");
  orders_.resize(static_cast<std::size_t>(order));
}

std::uint64_t NgramLm::entry_count(int order) const {
  if (order < 1 || order > order_) return 0;
  return level(static_cast<std::size_t>(order)).size();
}

std::uint64_t NgramLm::total_entries() const {
  std::uint64_t n = 0;
  for (const Map& m : orders_) n += m.size();
  return n;
}

const NgramEntry* NgramLm::find(std::span<const TokenId> ngram) const {
  if (ngram.empty() || ngram.size() > static_cast<std::size_t>(order_)) return nullptr;
  // Scratch key reused across lookups; queries may run concurrently.
  thread_local std::vector<TokenId> key;
  key.assign(ngram.begin(), ngram.end());
  const Map& m = level(ngram.size());
  auto it = m.find(key);
  return it == m.end() ? nullptr : &it->second;
}

void NgramLm::set(std::span<const TokenId> ngram, const NgramEntry& entry) {
  if (ngram.empty() || ngram.size() > static_cast<std::size_t>(order_))
    throw InputError("n-gram order " + std::to_string(ngram.size()) +
                     " out of range 1.." + std::to_string(order_));
  level(ngram.size())[std::vector<TokenId>(ngram.begin(), ngram.end())] = entry;
}

double NgramLm::cond_logprob(std::span<const TokenId> context, TokenId word) const {
  if (context.size() >= static_cast<std::size_t>(order_))
    context = context.subspan(context.size() - (order_ - 1));
  double backoff_sum = 0.0;
  std::vector<TokenId> key(context.begin(), context.end());
  key.push_back(word);
  for (;;) {
    const Map& m = level(key.size());
    auto it = m.find(key);
    if (it != m.end() && !it->second.placeholder)
      return backoff_sum + it->second.logprob;
    if (context.empty()) {
      // Word has no usable unigram: fall to <unk>, then to the fixed floor.
      const NgramEntry* unk = find(std::span<const TokenId>(&kUnkId, 1));
      if (unk != nullptr && !unk->placeholder) return backoff_sum + unk->logprob;
      return backoff_sum + kOovFloorLogProb;
    }
    const NgramEntry* ctx = find(context);
    if (ctx != nullptr && ctx->has_backoff) backoff_sum += ctx->backoff;
    context = context.subspan(1);
    key.erase(key.begin());
  }
}

double NgramLm::sequence_logprob(const Phrase& phrase) const {
  if (phrase.ids.empty()) throw InputError("cannot score an empty phrase");
  double total = 0.0;
  std::span<const TokenId> ids(phrase.ids);
  for (std::size_t k = 0; k < ids.size(); ++k) {
    std::size_t ctx_len = std::min(k, static_cast<std::size_t>(order_ - 1));
    total += cond_logprob(ids.subspan(k - ctx_len, ctx_len), ids[k]);
  }
  return total;
}

void NgramLm::insert_ngrams(std::span<const std::pair<Phrase, double>> entries) {
  for (const auto& [phrase, lp] : entries) {
    std::size_t n = phrase.ids.size();
    if (n == 0) throw InputError("cannot insert an empty n-gram");
    if (n > static_cast<std::size_t>(order_))
      throw InputError("inserted n-gram order " + std::to_string(n) +
                       " exceeds LM order " + std::to_string(order_));
    std::span<const TokenId> ids(phrase.ids);
    Map& m = level(n);
    auto [it, inserted] = m.try_emplace(phrase.ids);
    if (inserted || it->second.placeholder) {
      it->second.logprob = lp;
      it->second.placeholder = false;
      // an upgraded placeholder keeps its back-off weight
    }

    // The final word needs a real unigram, otherwise its explicit mass here
    // could never be accounted for in a full-vocabulary sum.
    if (n >= 2) {
      Map& uni = level(1);
      auto [uit, fresh] = uni.try_emplace(std::vector<TokenId>{ids.back()});
      if (fresh || uit->second.placeholder) {
        uit->second.logprob = kOovFloorLogProb;
        uit->second.placeholder = false;
      }
    }
    // Missing prefixes become context-only shells; their probability is
    // resolved by back-off at query time.
    for (std::size_t j = 1; j < n; ++j) {
      Map& pm = level(j);
      auto [pit, fresh] =
          pm.try_emplace(std::vector<TokenId>(ids.begin(), ids.begin() + j));
      if (fresh) {
        pit->second.logprob = kPlaceholderLogProb;
        pit->second.placeholder = true;
      }
    }
  }
}

void NgramLm::renormalize(const Vocab& vocab) {
  // Root level first: the explicit unigram distribution must sum to 1 for
  // any higher-order context to be normalizable at all.
  {
    KahanSum s;
    std::size_t real_unigrams = 0;
    for (const auto& [key, e] : level(1)) {
      if (e.placeholder) continue;
      s.add(std::pow(10.0, e.logprob));
      ++real_unigrams;
    }
    double sum = s.value();
    if (real_unigrams == 0) {
      if (total_entries() > level(1).size())
        throw NumericalError("LM has higher-order entries but no unigram mass");
      return;  // empty or shell-only model
    }
    if (std::abs(sum - 1.0) > 1e-12) {
      if (sum <= 0.0) throw NumericalError("unigram mass is zero");
      double delta = std::log10(sum);
      for (auto& [key, e] : level(1))
        if (!e.placeholder) e.logprob -= delta;
    }
  }

  // Bottom-up by context length: back-off weights at length k depend only on
  // level k+1 probabilities and on queries through contexts shorter than k,
  // which are final by then.
  for (int k = 1; k < order_; ++k) {
    Map& ctx_level = level(static_cast<std::size_t>(k));
    Map& cont_level = level(static_cast<std::size_t>(k) + 1);

    struct Continuation {
      TokenId word;
      NgramEntry* entry;
    };
    std::unordered_map<std::vector<TokenId>, std::vector<Continuation>, PhraseHash>
        groups;
    for (auto& [key, e] : cont_level) {
      std::vector<TokenId> prefix(key.begin(), key.end() - 1);
      if (ctx_level.find(prefix) == ctx_level.end())
        throw InputError("back-off chain violated: context '" +
                         serialize_tokens(vocab, prefix) + "' missing");
      groups[std::move(prefix)].push_back(Continuation{key.back(), &e});
    }

    for (auto& [context, e] : ctx_level) {
      auto git = groups.find(context);
      if (git == groups.end()) {
        e.has_backoff = false;  // no continuations: back-off weight is 1
        continue;
      }
      std::vector<Continuation>& conts = git->second;

      KahanSum explicit_sum;
      for (const Continuation& c : conts)
        if (!c.entry->placeholder) explicit_sum.add(std::pow(10.0, c.entry->logprob));
      double s = explicit_sum.value();
      if (s >= 1.0 - kRenormEpsilon) {
        // Over-full context: scale explicit mass down to leave back-off room.
        double delta = std::log10(s / (1.0 - kRenormEpsilon));
        for (const Continuation& c : conts)
          if (!c.entry->placeholder) c.entry->logprob -= delta;
        s = 1.0 - kRenormEpsilon;
      }

      std::span<const TokenId> shorter(context.data() + 1, context.size() - 1);
      KahanSum backed_sum;
      for (const Continuation& c : conts) {
        if (c.entry->placeholder) continue;
        backed_sum.add(std::pow(10.0, cond_logprob(shorter, c.word)));
      }
      double s_lower = backed_sum.value();
      if (s_lower >= 1.0)
        throw NumericalError(
            "cannot renormalize context '" + serialize_tokens(vocab, context) +
            "': lower-order mass of its continuations is " + format_log10(s_lower));

      e.backoff = std::log10((1.0 - s) / (1.0 - s_lower));
      e.has_backoff = true;
    }
  }
}

void NgramLm::for_each_sorted(
    const Vocab& vocab, int order,
    const std::function<void(std::span<const TokenId>, const NgramEntry&)>& fn) const {
  if (order < 1 || order > order_) return;
  const Map& m = level(static_cast<std::size_t>(order));
  std::vector<const Map::value_type*> items;
  items.reserve(m.size());
  for (const auto& kv : m) items.push_back(&kv);
  std::vector<std::vector<std::string_view>> words(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    words[i].reserve(items[i]->first.size());
    for (TokenId id : items[i]->first) words[i].push_back(vocab.resolve(id));
  }
  std::vector<std::size_t> idx(items.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return words[a] < words[b]; });
  for (std::size_t i : idx) fn(items[i]->first, items[i]->second);
}

namespace {

double parse_log_value(std::string_view token, std::uint64_t line_number,
                       const char* what) {
  std::string text(token);
  char* end = nullptr;
  double v = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size() || !std::isfinite(v))
    throw FormatError(std::string("malformed ") + what + " '" + text + "'",
                      line_number);
  return v;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

}  // namespace

NgramLm parse_arpa(LineSource& source, Vocab& vocab) {
  std::string line;
  // Preamble: anything before "\data\" is ignored (SRILM writes comments).
  bool saw_data = false;
  while (source.next(&line)) {
    if (trim(line) == "\\data\\") {
      saw_data = true;
      break;
    }
  }
  if (!saw_data) throw FormatError("missing \\data\\ header", source.line_number());

  std::vector<std::uint64_t> declared;
  while (source.next(&line)) {
    std::string_view t = trim(line);
    if (t.empty()) {
      if (!declared.empty()) break;  // blank line ends the count block
      continue;
    }
    if (t.substr(0, 6) != "ngram ")
      throw FormatError("expected 'ngram k=count', got '" + std::string(t) + "'",
                        source.line_number());
    std::string_view rest = t.substr(6);
    std::size_t eq = rest.find('=');
    if (eq == std::string_view::npos)
      throw FormatError("expected 'ngram k=count'", source.line_number());
    int k = std::atoi(std::string(rest.substr(0, eq)).c_str());
    std::uint64_t count =
        std::strtoull(std::string(rest.substr(eq + 1)).c_str(), nullptr, 10);
    if (k != static_cast<int>(declared.size()) + 1)
      throw FormatError("non-contiguous ngram orders in \\data\\ block",
                        source.line_number());
    declared.push_back(count);
  }
  if (declared.empty())
    throw FormatError("\\data\\ block declares no orders", source.line_number());

  int order = static_cast<int>(declared.size());
  NgramLm lm(order);

  int current = 0;  // section being filled
  bool saw_end = false;
  while (source.next(&line)) {
    std::string_view t = trim(line);
    if (t.empty()) continue;
    if (t == "\\end\\") {
      saw_end = true;
      break;
    }
    if (t.front() == '\\' && t.size() > 8 && t.substr(t.size() - 7) == "-grams:") {
      int k = std::atoi(std::string(t.substr(1, t.size() - 8)).c_str());
      if (k < 1 || k > order)
        throw FormatError("section order " + std::to_string(k) +
                              " outside declared range",
                          source.line_number());
      if (k != current + 1)
        throw FormatError("sections out of ascending order", source.line_number());
      current = k;
      continue;
    }
    if (current == 0)
      throw FormatError("entry before any \\k-grams: section", source.line_number());

    std::vector<std::string_view> tokens = split_ws(t);
    std::size_t n = static_cast<std::size_t>(current);
    if (tokens.size() != n + 1 && tokens.size() != n + 2)
      throw FormatError("expected " + std::to_string(n + 1) + " or " +
                            std::to_string(n + 2) + " fields in " +
                            std::to_string(current) + "-gram entry",
                        source.line_number());
    if (tokens.size() == n + 2 && current == order)
      throw FormatError("highest-order entry carries a back-off weight",
                        source.line_number());

    NgramEntry entry;
    entry.logprob = parse_log_value(tokens[0], source.line_number(), "log probability");
    if (entry.logprob > 0.0)
      throw FormatError("log probability must be <= 0", source.line_number());
    entry.placeholder = entry.logprob == kPlaceholderLogProb;
    if (tokens.size() == n + 2) {
      entry.backoff = parse_log_value(tokens.back(), source.line_number(),
                                      "back-off weight");
      entry.has_backoff = true;
    }
    std::vector<TokenId> ids;
    ids.reserve(n);
    for (std::size_t i = 1; i <= n; ++i) ids.push_back(vocab.intern(tokens[i]));
    auto [it, inserted] = lm.level(n).try_emplace(std::move(ids), entry);
    if (!inserted)
      throw FormatError("duplicate " + std::to_string(current) + "-gram entry",
                        source.line_number());
  }
  if (!saw_end) throw FormatError("missing \\end\\ marker", source.line_number());

  for (int k = 1; k <= order; ++k) {
    if (lm.entry_count(k) != declared[static_cast<std::size_t>(k) - 1])
      throw FormatError("declared " + std::to_string(declared[k - 1]) + " " +
                        std::to_string(k) + "-grams but loaded " +
                        std::to_string(lm.entry_count(k)));
  }
  return lm;
}

NgramLm parse_arpa_file(const std::string& path, Vocab& vocab) {
  FileLineSource source(path);
  return parse_arpa(source, vocab);
}

void serialize_arpa(const NgramLm& lm, const Vocab& vocab, std::ostream& out) {
  out << "\\data\\\n";
  for (int k = 1; k <= lm.order(); ++k)
    out << "ngram " << k << "=" << lm.entry_count(k) << "\n";
  for (int k = 1; k <= lm.order(); ++k) {
    out << "\n\\" << k << "-grams:\n";
    lm.for_each_sorted(vocab, k,
                       [&](std::span<const TokenId> ngram, const NgramEntry& e) {
                         out << format_log10(e.logprob) << '\t'
                             << serialize_tokens(vocab, ngram);
                         if (e.has_backoff) out << '\t' << format_log10(e.backoff);
                         out << '\n';
                       });
  }
  out << "\n\\end\\\n";
  if (!out) throw IoError("ARPA write failure");
}

std::string serialize_arpa_string(const NgramLm& lm, const Vocab& vocab) {
  std::ostringstream out;
  serialize_arpa(lm, vocab, out);
  return out.str();
}

NgramLm train_addk_lm(const std::vector<Phrase>& corpus, int order, double k,
                      const Vocab& vocab) {
  if (order < 1) throw InputError("order must be >= 1");
  if (k <= 0.0) throw InputError("smoothing constant k must be > 0");
  if (corpus.empty()) throw InputError("empty training corpus");

  using CountMap = std::unordered_map<std::vector<TokenId>, std::uint64_t, PhraseHash>;
  std::vector<CountMap> counts(static_cast<std::size_t>(order));
  std::unordered_set<TokenId> vocab_ids;
  vocab_ids.insert(kUnkId);
  std::uint64_t total_tokens = 0;

  for (const Phrase& sentence : corpus) {
    const std::vector<TokenId>& ids = sentence.ids;
    total_tokens += ids.size();
    for (TokenId id : ids) vocab_ids.insert(id);
    for (int n = 1; n <= order; ++n) {
      if (ids.size() < static_cast<std::size_t>(n)) break;
      for (std::size_t i = 0; i + n <= ids.size(); ++i)
        ++counts[n - 1][std::vector<TokenId>(ids.begin() + i, ids.begin() + i + n)];
    }
  }

  double v = static_cast<double>(vocab_ids.size());
  NgramLm lm(order);

  // Unigrams cover the full vocabulary (so <unk> always has real mass);
  // the distribution sums to 1 by construction.
  for (TokenId id : vocab_ids) {
    auto it = counts[0].find(std::vector<TokenId>{id});
    double c = it == counts[0].end() ? 0.0 : static_cast<double>(it->second);
    NgramEntry e;
    e.logprob = std::log10((c + k) / (static_cast<double>(total_tokens) + k * v));
    lm.set(std::span<const TokenId>(&id, 1), e);
  }

  // Higher orders keep only observed n-grams; back-off covers the rest.
  for (int n = 2; n <= order; ++n) {
    // context count = occurrences of the prefix followed by anything
    CountMap ctx_counts;
    for (const auto& [key, c] : counts[n - 1])
      ctx_counts[std::vector<TokenId>(key.begin(), key.end() - 1)] += c;
    for (const auto& [key, c] : counts[n - 1]) {
      std::vector<TokenId> prefix(key.begin(), key.end() - 1);
      double denom = static_cast<double>(ctx_counts[prefix]) + k * v;
      NgramEntry e;
      e.logprob = std::log10((static_cast<double>(c) + k) / denom);
      lm.set(key, e);
    }
  }

  lm.renormalize(vocab);
  return lm;
}

}  // namespace phraseadapt
