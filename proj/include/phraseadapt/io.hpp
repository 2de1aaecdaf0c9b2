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
// Line-oriented input over plain or gzip-compressed files.  All readers
// track 1-based line numbers and cumulative uncompressed byte offsets for
// error reporting.

#ifndef PHRASEADAPT_IO_HPP_
#define PHRASEADAPT_IO_HPP_

#include <cstdint>
#include <istream>
#include <memory>
#include <string>

namespace phraseadapt {

class LineSource {
 public:
  virtual ~LineSource() = default;

  // Reads the next line (without the trailing '\n') into `line`.
  // Returns false at end of input.  Throws IoError on read failure.
  virtual bool next(std::string* line) = 0;

  std::uint64_t line_number() const { return line_number_; }
  std::uint64_t byte_offset() const { return byte_offset_; }

 protected:
  std::uint64_t line_number_ = 0;  // lines delivered so far
  std::uint64_t byte_offset_ = 0;  // uncompressed bytes consumed
};

// Reads from an already-open std::istream (tests, pipes).
class StreamLineSource : public LineSource {
 public:
  explicit StreamLineSource(std::istream& in) : in_(in) {}
  bool next(std::string* line) override;

 private:
  std::istream& in_;
};

// Reads from a file path; gzip content is detected and decompressed
// transparently (zlib reads plain files as-is).
class FileLineSource : public LineSource {
 public:
  explicit FileLineSource(const std::string& path);
  ~FileLineSource() override;
  FileLineSource(const FileLineSource&) = delete;
  FileLineSource& operator=(const FileLineSource&) = delete;

  bool next(std::string* line) override;

 private:
  std::string path_;
  void* gz_ = nullptr;  // gzFile
};

std::unique_ptr<LineSource> open_lines(const std::string& path);

// Trims ASCII whitespace from both ends.
std::string_view trim(std::string_view s);

}  // namespace phraseadapt

#endif  // PHRASEADAPT_IO_HPP_
