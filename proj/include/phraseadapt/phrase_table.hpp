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
// Streaming reader/writer for Moses-format phrase tables:
//   src ||| tgt ||| score1 score2 ... [||| alignment [||| counts]]
// Trailing fields are carried verbatim so a pass-through re-serialization is
// byte-identical for canonical input.

#ifndef PHRASEADAPT_PHRASE_TABLE_HPP_
#define PHRASEADAPT_PHRASE_TABLE_HPP_

#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "phraseadapt/io.hpp"
#include "phraseadapt/vocab.hpp"

namespace phraseadapt {

struct PhrasePair {
  Phrase src;
  Phrase tgt;
  std::vector<double> scores;        // finite, > 0
  std::string raw_scores;            // third field verbatim; empty = format from values
  std::vector<std::string> extras;   // fields 4+ verbatim

  bool operator==(const PhrasePair& o) const {
    return src == o.src && tgt == o.tgt && scores == o.scores && extras == o.extras;
  }

  // Current text of the score field (verbatim if parsed, formatted otherwise).
  std::string score_field() const;
  // Appends one score, keeping value and text views in sync.
  void append_score(double value, const std::string& text);
};

struct TableStats {
  std::uint64_t entries = 0;
  std::uint64_t max_src_len = 0;
  std::uint64_t max_tgt_len = 0;
  std::uint64_t distinct_sources = 0;
  std::uint64_t malformed_skipped = 0;
};

// Parses one table line.  Throws FormatError (with `line_number`) on fewer
// than 3 fields, empty phrases, or non-numeric / non-positive scores.
PhrasePair parse_entry(Vocab& vocab, std::string_view line,
                       std::uint64_t line_number = 0);

// Canonical form: fields joined by " ||| ", one entry per line (no '\n').
std::string serialize_entry(const Vocab& vocab, const PhrasePair& pair);

enum class ParseMode { kStrict, kLenient };

// Pull-based streaming parser; memory use is bounded by one entry plus the
// vocab, independent of table size.
class TableReader {
 public:
  TableReader(LineSource& source, Vocab& vocab, ParseMode mode = ParseMode::kStrict);

  // Returns false at end of input.  In strict mode malformed lines throw
  // FormatError; in lenient mode they are skipped and counted, with the
  // first few messages retained in `warnings()`.
  bool next(PhrasePair* pair);

  const TableStats& stats() const { return stats_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  LineSource& source_;
  Vocab& vocab_;
  ParseMode mode_;
  TableStats stats_;
  std::string line_;
  std::vector<std::string> warnings_;
  std::unordered_set<std::vector<TokenId>, PhraseHash> seen_sources_;
};

// Splits a table line into fields on "|||", trimming surrounding whitespace
// from each field.  Shared with the reordering-table pass-through.
std::vector<std::string_view> split_fields(std::string_view line);

}  // namespace phraseadapt

#endif  // PHRASEADAPT_PHRASE_TABLE_HPP_
