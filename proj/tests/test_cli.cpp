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
// End-to-end checks against the installed phrase-adapt binary (path given
// via PHRASE_ADAPT_BIN).  Fixtures are generated with the library so the
// CLI is exercised on well-formed assets.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "phraseadapt/adapt_pipeline.hpp"
#include "phraseadapt/ngram_lm.hpp"

using namespace phraseadapt;
namespace fs = std::filesystem;

namespace {

std::string bin_path() {
  const char* env = std::getenv("PHRASE_ADAPT_BIN");
  REQUIRE_MESSAGE(env != nullptr, "PHRASE_ADAPT_BIN must point at the CLI binary");
  return env;
}

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

RunResult run_shell(const fs::path& dir, const std::string& full_cmd) {
  fs::path out = dir / "stdout.txt";
  fs::path err = dir / "stderr.txt";
  std::string cmd =
      full_cmd + " > '" + out.string() + "' 2> '" + err.string() + "'";
  int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WEXITSTATUS(status);
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

RunResult run_cli(const fs::path& dir, const std::string& args) {
  return run_shell(dir, "'" + bin_path() + "' " + args);
}

// Toy bilingual fixture: sources connect "s2 s3", targets connect "t2 t3".
struct Fixture {
  fs::path dir;
  fs::path in_pt, out_pt, in_lm_src, in_lm_tgt, out_lm, in_reo, out_reo;

  explicit Fixture(const std::string& name) {
    dir = fs::path("cli_fixtures") / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    in_pt = dir / "in.pt";
    out_pt = dir / "out.pt";
    in_lm_src = dir / "in.src.lm";
    in_lm_tgt = dir / "in.tgt.lm";
    out_lm = dir / "out.lm";
    in_reo = dir / "in.reo";
    out_reo = dir / "out.reo";

    spit(in_pt,
         "s1 s2 ||| t1 t2 ||| 0.5 0.5\n"
         "s3 s4 ||| t3 t4 ||| 0.5 0.5\n");
    spit(out_pt,
         "s2 s3 ||| t2 t3 ||| 0.4 ||| 0-0 1-1\n"
         "s2 s3 ||| t9 t9 ||| 0.4\n"
         "s9 s9 ||| t2 t3 ||| 0.4\n"
         "s9 ||| t9 ||| 0.4\n");
    spit(in_reo,
         "s1 s2 ||| t1 t2 ||| 0.2 0.3 0.5 0.2 0.3 0.5\n"
         "s3 s4 ||| t3 t4 ||| 0.2 0.3 0.5 0.2 0.3 0.5\n");
    spit(out_reo,
         "s2 s3 ||| t2 t3 ||| 0.4 0.3 0.3 0.4 0.3 0.3\n"
         "s9 s9 ||| t2 t3 ||| 0.4 0.3 0.3 0.4 0.3 0.3\n");

    Vocab v;
    {
      std::vector<Phrase> corpus = {parse_phrase(v, "s1 s2 s3 s4"),
                                    parse_phrase(v, "s2 s3 s1"),
                                    parse_phrase(v, "s4 s1 s2")};
      std::ofstream out(in_lm_src);
      serialize_arpa(train_addk_lm(corpus, 2, 1.0, v), v, out);
    }
    {
      std::vector<Phrase> corpus = {parse_phrase(v, "t1 t2 t3 t4"),
                                    parse_phrase(v, "t2 t3 t1"),
                                    parse_phrase(v, "t4 t1 t2")};
      std::ofstream out(in_lm_tgt);
      serialize_arpa(train_addk_lm(corpus, 2, 1.0, v), v, out);
    }
    {
      std::vector<Phrase> corpus = {parse_phrase(v, "t2 t3 t9"),
                                    parse_phrase(v, "t9 t2 t3"),
                                    parse_phrase(v, "t3 t9 t2")};
      std::ofstream out(out_lm);
      serialize_arpa(train_addk_lm(corpus, 2, 1.0, v), v, out);
    }
  }
};

}  // namespace

TEST_CASE("missing required flag exits 1 with usage text") {
  Fixture f("missing_flag");
  RunResult r = run_cli(f.dir, "stats");
  CHECK(r.exit_code == 1);
  CHECK(r.err.find("--in-pt") != std::string::npos);
}

TEST_CASE("unreadable input exits 2") {
  Fixture f("bad_input");
  RunResult r = run_cli(f.dir, "stats --in-pt " + (f.dir / "nope.pt").string());
  CHECK(r.exit_code == 2);
}

TEST_CASE("malformed table exits 2 with a line number") {
  Fixture f("bad_table");
  spit(f.dir / "broken.pt", "a ||| b ||| 0.5\nbroken\n");
  RunResult r = run_cli(f.dir, "stats --in-pt " + (f.dir / "broken.pt").string());
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("line 2") != std::string::npos);

  RunResult lenient =
      run_cli(f.dir, "stats --lenient --in-pt " + (f.dir / "broken.pt").string());
  CHECK(lenient.exit_code == 0);
  CHECK(nlohmann::json::parse(lenient.out)["malformed_skipped"] == 1);
}

TEST_CASE("stats reports table statistics as JSON") {
  Fixture f("stats");
  RunResult r = run_cli(f.dir, "stats --in-pt " + f.in_pt.string());
  REQUIRE(r.exit_code == 0);
  nlohmann::json j = nlohmann::json::parse(r.out);
  CHECK(j["entries"] == 2);
  CHECK(j["distinct_sources"] == 2);
  CHECK(j["max_src_len"] == 2);
}

TEST_CASE("extract produces the golden candidate TSV for case a") {
  Fixture f("extract");
  fs::path cand = f.dir / "cand.tsv";
  fs::path mono = f.dir / "mono.tsv";
  RunResult r = run_cli(f.dir, "extract --in-pt " + f.in_pt.string() + " --out-pt " +
                                   f.out_pt.string() + " --in-lm-tgt " +
                                   f.in_lm_tgt.string() + " --out-lm " +
                                   f.out_lm.string() + " --case a --bilingual-out " +
                                   cand.string() + " --monolingual-out " +
                                   mono.string());
  REQUIRE(r.exit_code == 0);
  CHECK(slurp(cand) == "a\ts2 s3\tt2 t3\n");
  // The only explicit out-LM bigram connecting on the target side and absent
  // from the in-domain LM is "t2 t3"... which IS explicit in-domain here, so
  // the mono list holds the remaining connecting bigrams.
  std::string mono_text = slurp(mono);
  CHECK(mono_text.find("t2 t3") == std::string::npos);

  RunResult either = run_cli(
      f.dir, "extract --in-pt " + f.in_pt.string() + " --out-pt " + f.out_pt.string() +
                 " --case b --bilingual-out " + cand.string());
  REQUIRE(either.exit_code == 0);
  CHECK(slurp(cand) ==
        "a\ts2 s3\tt2 t3\n"
        "c\ts2 s3\tt9 t9\n"
        "d\ts9 s9\tt2 t3\n");
}

TEST_CASE("pipeline on empty out-of-domain inputs annotates in-domain assets") {
  Fixture f("identity");
  spit(f.out_pt, "");
  spit(f.out_reo, "");
  // Minimal empty ARPA: declared zero unigrams.
  spit(f.out_lm, "\\data\\\nngram 1=0\n\n\\1-grams:\n\n\\end\\\n");
  fs::path merged_pt = f.dir / "merged.pt";
  fs::path merged_lm = f.dir / "merged.lm";
  fs::path merged_reo = f.dir / "merged.reo";
  RunResult r = run_cli(
      f.dir, "pipeline --in-pt " + f.in_pt.string() + " --out-pt " + f.out_pt.string() +
                 " --in-lm-src " + f.in_lm_src.string() + " --in-lm-tgt " +
                 f.in_lm_tgt.string() + " --out-lm " + f.out_lm.string() +
                 " --reordering " + f.in_reo.string() + " --out-reordering " +
                 f.out_reo.string() + " --merged-pt " + merged_pt.string() +
                 " --merged-lm " + merged_lm.string() + " --merged-reo " +
                 merged_reo.string());
  REQUIRE(r.exit_code == 0);

  CHECK(slurp(merged_pt) ==
        "s1 s2 ||| t1 t2 ||| 0.5 0.5 1\n"
        "s3 s4 ||| t3 t4 ||| 0.5 0.5 1\n");
  CHECK(slurp(merged_reo) == slurp(f.in_reo));

  // Merged LM equals the renormalized in-domain LM.
  Vocab v;
  NgramLm in_lm = parse_arpa_file(f.in_lm_tgt.string(), v);
  NgramLm expected = augment_lm(in_lm, {}, v);
  CHECK(slurp(merged_lm) == serialize_arpa_string(expected, v));
}

TEST_CASE("pipeline equals chained subcommands byte-for-byte") {
  Fixture fa("pipe_a");
  Fixture fb("pipe_b");

  auto paths = [](const Fixture& f) {
    return std::map<std::string, fs::path>{
        {"cand", f.dir / "merged.pt.candidates.tsv"},
        {"mono", f.dir / "merged.pt.candidates-lm.tsv"},
        {"ranked", f.dir / "merged.pt.ranked.tsv"},
        {"ranked_mono", f.dir / "merged.pt.ranked-lm.tsv"},
        {"pt", f.dir / "merged.pt"},
        {"lm", f.dir / "merged.lm"},
        {"reo", f.dir / "merged.reo"}};
  };
  auto pa = paths(fa);
  auto pb = paths(fb);

  RunResult pipeline = run_cli(
      fa.dir,
      "pipeline --in-pt " + fa.in_pt.string() + " --out-pt " + fa.out_pt.string() +
          " --in-lm-src " + fa.in_lm_src.string() + " --in-lm-tgt " +
          fa.in_lm_tgt.string() + " --out-lm " + fa.out_lm.string() + " --reordering " +
          fa.in_reo.string() + " --out-reordering " + fa.out_reo.string() +
          " --merged-pt " + pa["pt"].string() + " --merged-lm " + pa["lm"].string() +
          " --merged-reo " + pa["reo"].string() + " --method op --case a --top-k 5");
  REQUIRE_MESSAGE(pipeline.exit_code == 0, pipeline.err);

  REQUIRE(run_cli(fb.dir, "extract --in-pt " + fb.in_pt.string() + " --out-pt " +
                              fb.out_pt.string() + " --in-lm-tgt " +
                              fb.in_lm_tgt.string() + " --out-lm " +
                              fb.out_lm.string() + " --case a --bilingual-out " +
                              pb["cand"].string() + " --monolingual-out " +
                              pb["mono"].string())
              .exit_code == 0);
  REQUIRE(run_cli(fb.dir, "rank-op --in-pt " + fb.in_pt.string() + " --in-lm-src " +
                              fb.in_lm_src.string() + " --in-lm-tgt " +
                              fb.in_lm_tgt.string() + " --bilingual " +
                              pb["cand"].string() + " --monolingual " +
                              pb["mono"].string() + " --ranked-out " +
                              pb["ranked"].string() + " --ranked-mono-out " +
                              pb["ranked_mono"].string() + " --top-k 5")
              .exit_code == 0);
  REQUIRE(run_cli(fb.dir, "merge-pt --in-pt " + fb.in_pt.string() + " --out-pt " +
                              fb.out_pt.string() + " --selected " +
                              pb["ranked"].string() + " --merged-out " +
                              pb["pt"].string())
              .exit_code == 0);
  REQUIRE(run_cli(fb.dir, "merge-lm --in-lm " + fb.in_lm_tgt.string() + " --out-lm " +
                              fb.out_lm.string() + " --selected " +
                              pb["ranked_mono"].string() + " --merged-out " +
                              pb["lm"].string())
              .exit_code == 0);
  REQUIRE(run_cli(fb.dir, "merge-reo --reordering " + fb.in_reo.string() +
                              " --out-reordering " + fb.out_reo.string() +
                              " --selected " + pb["ranked"].string() +
                              " --merged-out " + pb["reo"].string())
              .exit_code == 0);

  for (const char* key : {"cand", "mono", "ranked", "ranked_mono", "pt", "lm", "reo"})
    CHECK_MESSAGE(slurp(pa[key]) == slurp(pb[key]), "mismatch on ", key);
}

TEST_CASE("numerical failures exit 3") {
  Fixture f("degenerate");
  // Context "a" explicitly continues with the whole vocabulary: renormalize
  // must reject the degenerate lower-order mass.
  spit(f.dir / "degenerate.lm",
       "\\data\\\n"
       "ngram 1=2\n"
       "ngram 2=2\n"
       "\n"
       "\\1-grams:\n"
       "-0.30103\ta\t0\n"
       "-0.30103\tb\n"
       "\n"
       "\\2-grams:\n"
       "-0.5228787\ta a\n"
       "-0.5228787\ta b\n"
       "\n"
       "\\end\\\n");
  RunResult r = run_cli(f.dir, "merge-lm --in-lm " + (f.dir / "degenerate.lm").string() +
                                   " --merged-out " + (f.dir / "x.lm").string());
  CHECK(r.exit_code == 3);
  CHECK(r.err.find("numerical error") != std::string::npos);
}

TEST_CASE("config file values are overridden by flags") {
  Fixture f("config");
  fs::path cfg = f.dir / "run.cfg";
  fs::path cand = f.dir / "cand.tsv";
  fs::path ranked = f.dir / "ranked.tsv";
  spit(cfg, "[extract]\nin-pt=" + f.in_pt.string() + "\ncase=b\n");

  // Config supplies --in-pt and --case b; the flag overrides the case.
  RunResult r = run_cli(f.dir, "--config " + cfg.string() + " extract --out-pt " +
                                   f.out_pt.string() + " --case a --bilingual-out " +
                                   cand.string());
  REQUIRE_MESSAGE(r.exit_code == 0, r.err);
  CHECK(slurp(cand) == "a\ts2 s3\tt2 t3\n");

  // Ranking with threads from the environment fallback.
  RunResult ranked_run = run_cli(
      f.dir, std::string("env PHRASE_ADAPT_THREADS=2 '") + bin_path() +
                 "' rank-op --in-pt " + f.in_pt.string() + " --in-lm-src " +
                 f.in_lm_src.string() + " --in-lm-tgt " + f.in_lm_tgt.string() +
                 " --bilingual " + cand.string() + " --ranked-out " + ranked.string());
  CHECK(ranked_run.exit_code == 0);
  CHECK_FALSE(slurp(ranked).empty());
}
