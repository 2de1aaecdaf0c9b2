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
// Python bindings for the main operations.  Phrases are passed as
// whitespace-separated token strings; ids stay internal.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "phraseadapt/adapt_pipeline.hpp"
#include "phraseadapt/connecting.hpp"
#include "phraseadapt/errors.hpp"
#include "phraseadapt/ngram_lm.hpp"
#include "phraseadapt/nn_model.hpp"
#include "phraseadapt/nn_train.hpp"
#include "phraseadapt/op_scoring.hpp"
#include "phraseadapt/phrase_table.hpp"
#include "phraseadapt/vocab.hpp"

namespace py = pybind11;
using namespace phraseadapt;

namespace {

std::vector<std::string_view> split_ws_tokens(std::string_view s) {
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

NnExample make_example(const NnModel& model, const std::string& input_text,
                       const std::string& target_word) {
  std::vector<std::int32_t> words;
  for (std::string_view t : split_ws_tokens(input_text))
    words.push_back(model.input_id(t));
  NnExample ex;
  ex.slots.resize(model.input_slots());
  model.fill_slots(words, ex.slots);
  ex.target = model.output_id(target_word);
  return ex;
}

py::dict json_to_dict(const nlohmann::json& j) {
  py::module_ json = py::module_::import("json");
  return json.attr("loads")(j.dump());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "connecting-phrase domain adaptation core";
  m.attr("__version__") = "0.1.0";

  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<Vocab>(m, "Vocab")
      .def(py::init<>())
      .def("intern", [](Vocab& v, const std::string& t) { return v.intern(t); })
      .def("resolve",
           [](const Vocab& v, TokenId id) { return std::string(v.resolve(id)); })
      .def("lookup", [](const Vocab& v, const std::string& t) { return v.lookup(t); })
      .def("__contains__",
           [](const Vocab& v, const std::string& t) { return v.contains(t); })
      .def("__len__", &Vocab::size);

  py::class_<Phrase>(m, "Phrase")
      .def_readonly("ids", &Phrase::ids)
      .def("__len__", &Phrase::size)
      .def("__eq__", [](const Phrase& a, const Phrase& b) { return a == b; });

  m.def("parse_phrase", &parse_phrase, py::arg("vocab"), py::arg("text"));
  m.def("serialize_phrase", &serialize_phrase, py::arg("vocab"), py::arg("phrase"));

  py::class_<PhrasePair>(m, "PhrasePair")
      .def_readonly("src", &PhrasePair::src)
      .def_readonly("tgt", &PhrasePair::tgt)
      .def_readonly("scores", &PhrasePair::scores)
      .def_readonly("extras", &PhrasePair::extras);

  m.def(
      "parse_entry",
      [](Vocab& v, const std::string& line) { return parse_entry(v, line); },
      py::arg("vocab"), py::arg("line"));
  m.def("serialize_entry", &serialize_entry, py::arg("vocab"), py::arg("pair"));

  py::class_<NgramLm>(m, "NgramLm")
      .def_property_readonly("order", &NgramLm::order)
      .def("entry_count", &NgramLm::entry_count, py::arg("order"))
      .def("total_entries", &NgramLm::total_entries);

  m.def(
      "parse_arpa",
      [](Vocab& v, const std::string& path) { return parse_arpa_file(path, v); },
      py::arg("vocab"), py::arg("path"));
  m.def(
      "parse_arpa_text",
      [](Vocab& v, const std::string& text) {
        std::istringstream in(text);
        StreamLineSource source(in);
        return parse_arpa(source, v);
      },
      py::arg("vocab"), py::arg("text"));
  m.def("serialize_arpa",
        [](const NgramLm& lm, const Vocab& v) { return serialize_arpa_string(lm, v); },
        py::arg("lm"), py::arg("vocab"));
  m.def(
      "cond_logprob",
      [](const NgramLm& lm, Vocab& v, const std::string& context,
         const std::string& word) {
        std::vector<TokenId> ctx;
        for (std::string_view t : split_ws_tokens(context)) ctx.push_back(v.intern(t));
        return lm.cond_logprob(ctx, v.intern(word));
      },
      py::arg("lm"), py::arg("vocab"), py::arg("context"), py::arg("word"));
  m.def(
      "sequence_logprob",
      [](const NgramLm& lm, Vocab& v, const std::string& text) {
        return lm.sequence_logprob(parse_phrase(v, text));
      },
      py::arg("lm"), py::arg("vocab"), py::arg("text"));
  m.def(
      "insert_ngrams",
      [](NgramLm& lm, Vocab& v,
         const std::vector<std::pair<std::string, double>>& entries) {
        std::vector<std::pair<Phrase, double>> parsed;
        parsed.reserve(entries.size());
        for (const auto& [text, lp] : entries)
          parsed.emplace_back(parse_phrase(v, text), lp);
        lm.insert_ngrams(parsed);
      },
      py::arg("lm"), py::arg("vocab"), py::arg("entries"));
  m.def(
      "renormalize",
      [](NgramLm& lm, const Vocab& v) { lm.renormalize(v); },
      py::arg("lm"), py::arg("vocab"));
  m.def(
      "train_addk_lm",
      [](Vocab& v, const std::vector<std::string>& corpus, int order, double k) {
        std::vector<Phrase> phrases;
        phrases.reserve(corpus.size());
        for (const std::string& line : corpus) phrases.push_back(parse_phrase(v, line));
        return train_addk_lm(phrases, order, k, v);
      },
      py::arg("vocab"), py::arg("corpus"), py::arg("order"), py::arg("k"));

  py::class_<AffixIndex>(m, "AffixIndex")
      .def_property_readonly("phrase_count",
                             [](const AffixIndex& i) { return i.phrases().size(); })
      .def_property_readonly("affix_entries", &AffixIndex::affix_entries);

  m.def(
      "build_affix_index",
      [](Vocab& v, const std::vector<std::string>& phrases, int max_affix_len,
         std::uint32_t occurrence_cap) {
        AffixIndexOptions options;
        options.max_affix_len = max_affix_len;
        options.occurrence_cap = occurrence_cap;
        std::vector<Phrase> parsed;
        parsed.reserve(phrases.size());
        for (const std::string& p : phrases) parsed.push_back(parse_phrase(v, p));
        return build_affix_index(parsed, options);
      },
      py::arg("vocab"), py::arg("phrases"), py::arg("max_affix_len") = 7,
      py::arg("occurrence_cap") = 1000);
  m.def(
      "is_connecting",
      [](const AffixIndex& index, Vocab& v, const std::string& text) {
        return index.is_connecting(parse_phrase(v, text)).splits;
      },
      py::arg("index"), py::arg("vocab"), py::arg("text"));
  m.def(
      "brute_force_is_connecting",
      [](Vocab& v, const std::vector<std::string>& phrases, const std::string& text) {
        std::vector<Phrase> parsed;
        parsed.reserve(phrases.size());
        for (const std::string& p : phrases) parsed.push_back(parse_phrase(v, p));
        return brute_force_is_connecting(parsed, parse_phrase(v, text)).splits;
      },
      py::arg("vocab"), py::arg("phrases"), py::arg("text"));
  m.def(
      "classify_pair",
      [](const AffixIndex& src_index, const AffixIndex& tgt_index, Vocab& v,
         const std::string& src, const std::string& tgt) {
        PhrasePair pair;
        pair.src = parse_phrase(v, src);
        pair.tgt = parse_phrase(v, tgt);
        return std::string(1, case_letter(classify_pair(src_index, tgt_index, pair)));
      },
      py::arg("src_index"), py::arg("tgt_index"), py::arg("vocab"), py::arg("src"),
      py::arg("tgt"));

  m.def(
      "occurring_probability",
      [](Vocab& v, const std::string& text, const AffixIndex& index,
         const NgramLm& lm) {
        return occurring_probability(parse_phrase(v, text), index, lm).value;
      },
      py::arg("vocab"), py::arg("text"), py::arg("index"), py::arg("lm"));
  m.def(
      "pair_op_score",
      [](Vocab& v, const std::string& src, const std::string& tgt,
         const AffixIndex& src_index, const NgramLm& src_lm,
         const AffixIndex& tgt_index, const NgramLm& tgt_lm) {
        PhrasePair pair;
        pair.src = parse_phrase(v, src);
        pair.tgt = parse_phrase(v, tgt);
        OpScorer src_scorer(src_index, src_lm);
        OpScorer tgt_scorer(tgt_index, tgt_lm);
        return pair_op_score(pair, src_scorer, tgt_scorer);
      },
      py::arg("vocab"), py::arg("src"), py::arg("tgt"), py::arg("src_index"),
      py::arg("src_lm"), py::arg("tgt_index"), py::arg("tgt_lm"));

  py::class_<NnConfig>(m, "NnConfig")
      .def(py::init<>())
      .def_readwrite("window", &NnConfig::window)
      .def_readwrite("proj_dim", &NnConfig::proj_dim)
      .def_readwrite("hidden_dim", &NnConfig::hidden_dim)
      .def_readwrite("seed", &NnConfig::seed)
      .def_readwrite("learning_rate", &NnConfig::learning_rate)
      .def_readwrite("epochs", &NnConfig::epochs)
      .def_readwrite("batch_size", &NnConfig::batch_size)
      .def_readwrite("resample_rate", &NnConfig::resample_rate);

  py::class_<NnModel>(m, "NnModel")
      .def_static(
          "init",
          [](const std::string& kind, const NnConfig& config,
             std::vector<std::string> input_tokens,
             std::vector<std::string> output_tokens) {
            NnKind k = kind == "tm" ? NnKind::kTranslation : NnKind::kLanguageModel;
            return NnModel::init(k, config, std::move(input_tokens),
                                 std::move(output_tokens));
          },
          py::arg("kind"), py::arg("config"), py::arg("input_tokens"),
          py::arg("output_tokens"))
      .def_property_readonly("kind",
                             [](const NnModel& m2) {
                               return m2.kind() == NnKind::kTranslation
                                          ? std::string("tm")
                                          : std::string("lm");
                             })
      .def_property_readonly("input_vocab", &NnModel::input_vocab)
      .def_property_readonly("output_vocab", &NnModel::output_vocab)
      .def_property_readonly("parameter_count", &NnModel::parameter_count)
      .def("save", &NnModel::save, py::arg("path"))
      .def_static("load", &NnModel::load, py::arg("path"));

  m.def(
      "train_model",
      [](NnModel& model, const std::vector<std::string>& data_lines) {
        std::string joined;
        for (const std::string& line : data_lines) {
          joined += line;
          joined += '\n';
        }
        std::istringstream in(joined);
        StreamLineSource source(in);
        std::vector<NnExample> examples =
            model.kind() == NnKind::kTranslation
                ? translation_examples_from_table(model, source)
                : lm_examples_from_corpus(model, source);
        return train(model, examples).epoch_loss;
      },
      py::arg("model"), py::arg("data_lines"),
      "Train on phrase-table lines (tm) or sentences (lm); returns epoch losses");

  m.def(
      "q_score",
      [](const NnModel& model, const std::string& src, const std::string& tgt) {
        return q_score_tokens(model, split_ws_tokens(src), split_ws_tokens(tgt));
      },
      py::arg("model"), py::arg("src"), py::arg("tgt"));
  m.def(
      "q_score_lm",
      [](const NnModel& model, const std::string& text) {
        return q_score_lm_tokens(model, split_ws_tokens(text));
      },
      py::arg("model"), py::arg("text"));
  m.def(
      "d_minus",
      [](const NnModel& in, const NnModel& out, const std::string& src,
         const std::string& tgt) {
        Vocab v;
        PhrasePair pair;
        pair.src = parse_phrase(v, src);
        pair.tgt = parse_phrase(v, tgt);
        return d_minus(in, out, v, pair);
      },
      py::arg("model_in"), py::arg("model_out"), py::arg("src"), py::arg("tgt"));
  m.def(
      "d_minus_lm",
      [](const NnModel& in, const NnModel& out, const std::string& text) {
        Vocab v;
        return d_minus_lm(in, out, v, parse_phrase(v, text));
      },
      py::arg("model_in"), py::arg("model_out"), py::arg("text"));
  m.def(
      "gradient_check",
      [](NnModel& model, const std::string& input_text, const std::string& target_word,
         double epsilon, std::uint64_t seed) {
        NnExample ex = make_example(model, input_text, target_word);
        return gradient_check(model, ex, epsilon, seed).max_rel_error;
      },
      py::arg("model"), py::arg("input_text"), py::arg("target_word"),
      py::arg("epsilon") = 1e-4, py::arg("seed") = 7);

  m.def(
      "augment_lm",
      [](const NgramLm& in_lm, Vocab& v,
         const std::vector<std::pair<std::string, double>>& entries) {
        std::vector<std::pair<Phrase, double>> parsed;
        parsed.reserve(entries.size());
        for (const auto& [text, lp] : entries)
          parsed.emplace_back(parse_phrase(v, text), lp);
        return augment_lm(in_lm, parsed, v);
      },
      py::arg("in_lm"), py::arg("vocab"), py::arg("entries"));
  m.def(
      "interpolate_lm_qin",
      [](const NgramLm& lm, const NnModel& model, Vocab& v, double lambda,
         const std::string& text) {
        return interpolate_lm_qin(lm, model, v, lambda, parse_phrase(v, text));
      },
      py::arg("lm"), py::arg("model_in"), py::arg("vocab"), py::arg("lambda_"),
      py::arg("text"));

  m.def(
      "run_pipeline",
      [](const py::kwargs& kwargs) {
        PipelineOptions options;
        auto str = [&](const char* key) {
          return kwargs.contains(key) ? kwargs[key].cast<std::string>() : std::string();
        };
        options.in_pt = str("in_pt");
        options.out_pt = str("out_pt");
        options.in_lm_src = str("in_lm_src");
        options.in_lm_tgt = str("in_lm_tgt");
        options.out_lm = str("out_lm");
        options.in_reo = str("reordering");
        options.out_reo = str("out_reordering");
        options.merged_pt = str("merged_pt");
        options.merged_lm = str("merged_lm");
        options.merged_reo = str("merged_reo");
        options.nn_tm_in = str("nn_tm_in");
        options.nn_tm_out = str("nn_tm_out");
        options.nn_lm_in = str("nn_lm_in");
        options.nn_lm_out = str("nn_lm_out");
        if (kwargs.contains("method"))
          options.method = parse_rank_method(kwargs["method"].cast<std::string>());
        if (kwargs.contains("scope"))
          options.scope = parse_scope(kwargs["scope"].cast<std::string>());
        if (kwargs.contains("case"))
          options.policy = CasePolicy::parse(kwargs["case"].cast<std::string>());
        if (kwargs.contains("top_k"))
          options.select.top_k = kwargs["top_k"].cast<std::uint64_t>();
        if (kwargs.contains("min_score"))
          options.select.min_score = kwargs["min_score"].cast<double>();
        if (kwargs.contains("threads"))
          options.threads = kwargs["threads"].cast<int>();
        if (kwargs.contains("lenient"))
          options.lenient = kwargs["lenient"].cast<bool>();
        if (kwargs.contains("max_affix_len"))
          options.affix.max_affix_len = kwargs["max_affix_len"].cast<int>();
        AdaptReport report = run_pipeline(options);
        return json_to_dict(report.to_json(options));
      },
      "Run the full pipeline; accepts the CLI flags as keyword arguments");
}
