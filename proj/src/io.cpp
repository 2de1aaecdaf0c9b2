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

#include "phraseadapt/io.hpp"

#include <zlib.h>

#include <cstring>

#include "phraseadapt/errors.hpp"

namespace phraseadapt {

bool StreamLineSource::next(std::string* line) {
  if (!std::getline(in_, *line)) {
    if (in_.bad()) throw IoError("stream read failure", byte_offset_);
    return false;
  }
  // getline keeps a '\r' from CRLF input; normalize it away.
  if (!line->empty() && line->back() == '\r') line->pop_back();
  byte_offset_ += line->size() + 1;
  ++line_number_;
  return true;
}

FileLineSource::FileLineSource(const std::string& path) : path_(path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (f == nullptr) throw IoError("cannot open " + path);
  gzbuffer(f, 1 << 16);
  gz_ = f;
}

FileLineSource::~FileLineSource() {
  if (gz_ != nullptr) gzclose(static_cast<gzFile>(gz_));
}

bool FileLineSource::next(std::string* line) {
  gzFile f = static_cast<gzFile>(gz_);
  line->clear();
  char buf[1 << 14];
  bool got_any = false;
  for (;;) {
    if (gzgets(f, buf, sizeof(buf)) == nullptr) {
      int errnum = 0;
      const char* msg = gzerror(f, &errnum);
      if (errnum != Z_OK && errnum != Z_STREAM_END)
        throw IoError("read failure on " + path_ + ": " + (msg ? msg : ""),
                      byte_offset_);
      break;  // EOF
    }
    got_any = true;
    std::size_t n = std::strlen(buf);
    byte_offset_ += n;
    if (n > 0 && buf[n - 1] == '\n') {
      line->append(buf, n - 1);
      if (!line->empty() && line->back() == '\r') line->pop_back();
      ++line_number_;
      return true;
    }
    line->append(buf, n);  // long line, keep reading
  }
  if (got_any) {  // final line without trailing newline
    if (!line->empty() && line->back() == '\r') line->pop_back();
    ++line_number_;
    return true;
  }
  return false;
}

std::unique_ptr<LineSource> open_lines(const std::string& path) {
  return std::make_unique<FileLineSource>(path);
}

std::string_view trim(std::string_view s) {
  const char* ws = " \t\r\n\f\v";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

}  // namespace phraseadapt
