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

#include "phraseadapt/phrase_table.hpp"

#include <cmath>
#include <cstdlib>

#include "phraseadapt/errors.hpp"
#include "phraseadapt/numeric.hpp"

namespace phraseadapt {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  for (;;) {
    std::size_t sep = line.find(kFieldSeparator, pos);
    if (sep == std::string_view::npos) {
      fields.push_back(trim(line.substr(pos)));
      return fields;
    }
    fields.push_back(trim(line.substr(pos, sep - pos)));
    pos = sep + kFieldSeparator.size();
  }
}

std::string PhrasePair::score_field() const {
  if (!raw_scores.empty()) return raw_scores;
  std::string out;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (i > 0) out += ' ';
    out += format_shortest(scores[i]);
  }
  return out;
}

void PhrasePair::append_score(double value, const std::string& text) {
  std::string field = score_field();
  if (!field.empty()) field += ' ';
  field += text;
  raw_scores = std::move(field);
  scores.push_back(value);
}

namespace {

std::vector<double> parse_scores(std::string_view field, std::uint64_t line_number) {
  std::vector<double> scores;
  std::size_t i = 0;
  while (i < field.size()) {
    while (i < field.size() && field[i] == ' ') ++i;
    std::size_t start = i;
    while (i < field.size() && field[i] != ' ' && field[i] != '\t') ++i;
    if (i == start) {
      ++i;
      continue;
    }
    std::string token(field.substr(start, i - start));
    char* end = nullptr;
    double v = std::strtod(token.c_str(), &end);
    if (end != token.c_str() + token.size())
      throw FormatError("non-numeric score '" + token + "'", line_number);
    if (!std::isfinite(v) || v <= 0.0)
      throw FormatError("score must be finite and > 0, got '" + token + "'",
                        line_number);
    scores.push_back(v);
  }
  if (scores.empty()) throw FormatError("empty score field", line_number);
  return scores;
}

}  // namespace

PhrasePair parse_entry(Vocab& vocab, std::string_view line, std::uint64_t line_number) {
  std::vector<std::string_view> fields = split_fields(line);
  if (fields.size() < 3)
    throw FormatError("expected at least 3 '|||'-separated fields, got " +
                          std::to_string(fields.size()),
                      line_number);
  PhrasePair pair;
  try {
    pair.src = parse_phrase(vocab, fields[0]);
    pair.tgt = parse_phrase(vocab, fields[1]);
  } catch (const InputError& e) {
    throw FormatError(e.what(), line_number);
  }
  pair.scores = parse_scores(fields[2], line_number);
  pair.raw_scores = std::string(fields[2]);
  for (std::size_t i = 3; i < fields.size(); ++i)
    pair.extras.emplace_back(fields[i]);
  return pair;
}

std::string serialize_entry(const Vocab& vocab, const PhrasePair& pair) {
  std::string out = serialize_phrase(vocab, pair.src);
  out += " ||| ";
  out += serialize_phrase(vocab, pair.tgt);
  out += " ||| ";
  out += pair.score_field();
  for (const std::string& extra : pair.extras) {
    out += " ||| ";
    out += extra;
  }
  return out;
}

TableReader::TableReader(LineSource& source, Vocab& vocab, ParseMode mode)
    : source_(source), vocab_(vocab), mode_(mode) {}

bool TableReader::next(PhrasePair* pair) {
  while (source_.next(&line_)) {
    try {
      *pair = parse_entry(vocab_, line_, source_.line_number());
    } catch (const FormatError& e) {
      if (mode_ == ParseMode::kStrict) throw;
      ++stats_.malformed_skipped;
      if (warnings_.size() < 16) warnings_.emplace_back(e.what());
      continue;
    }
    ++stats_.entries;
    stats_.max_src_len = std::max<std::uint64_t>(stats_.max_src_len, pair->src.size());
    stats_.max_tgt_len = std::max<std::uint64_t>(stats_.max_tgt_len, pair->tgt.size());
    if (seen_sources_.insert(pair->src.ids).second) ++stats_.distinct_sources;
    return true;
  }
  return false;
}

}  // namespace phraseadapt
