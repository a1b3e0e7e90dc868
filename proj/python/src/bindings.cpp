#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "dialport/chatbot.hpp"
#include "dialport/deployment.hpp"
#include "dialport/nlg.hpp"
#include "dialport/nlu.hpp"
#include "dialport/portal.hpp"

namespace py = pybind11;
using namespace dialport;

namespace {

nlohmann::json to_json_value(const py::handle& obj) {
  auto text = py::module_::import("json").attr("dumps")(obj).cast<std::string>();
  return nlohmann::json::parse(text);
}

py::object from_json_value(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

py::dict entry_dict(const portal::TranscriptEntry& e, const std::string& session_id) {
  return from_json_value(portal::to_json(e, session_id));
}

class PyPortal {
 public:
  PyPortal(std::optional<std::filesystem::path> data_dir, std::uint64_t seed) {
    DeploymentOptions options;
    options.config = data_dir.value_or(default_data_dir()) / "deployment.json";
    portal::PortalConfig config;
    config.nlg_seed = seed;
    portal_ = std::make_shared<portal::Portal>(load_deployment(options), config);
  }

  py::dict create_session() {
    auto s = portal_->create_session();
    py::dict d;
    d["session_id"] = s.session_id;
    d["reply"] = s.reply;
    d["active_agent"] = s.active_agent;
    d["ended"] = false;
    return d;
  }

  py::dict say(const std::string& session_id, const std::string& text) {
    portal::TurnReply r;
    {
      py::gil_scoped_release release;
      r = portal_->post_utterance(session_id, text);
    }
    py::dict d;
    d["reply"] = r.reply;
    d["active_agent"] = r.active_agent;
    d["ended"] = r.ended;
    return d;
  }

  py::list transcript(const std::string& session_id) const {
    py::list out;
    for (const auto& e : portal_->get_transcript(session_id)) out.append(entry_dict(e, session_id));
    return out;
  }

  std::size_t live_sessions() const { return portal_->live_sessions(); }

 private:
  std::shared_ptr<portal::Portal> portal_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "dialport core bindings";

  static py::exception<Error> base(m, "DialportError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(base, (e.code() + ": " + e.what()).c_str());
    }
  });

  m.def("default_data_dir", &default_data_dir);

  py::class_<nlu::Lexicon>(m, "Lexicon")
      .def_static("from_string", [](const std::string& text) { return nlu::Lexicon::parse_string(text); })
      .def("labels", [](const nlu::Lexicon& lex, const std::string& kind) {
        return lex.labels(kind == "intent" ? nlu::LabelKind::Intent : nlu::LabelKind::Domain);
      });
  m.def("load_lexicon", [](const std::filesystem::path& p) { return nlu::load_lexicon(p); });

  py::class_<nlu::SemanticFrame>(m, "SemanticFrame")
      .def_readonly("utterance", &nlu::SemanticFrame::utterance)
      .def_readonly("domains", &nlu::SemanticFrame::domains)
      .def_readonly("intents", &nlu::SemanticFrame::intents)
      .def_property_readonly("entities",
                             [](const nlu::SemanticFrame& f) {
                               py::list out;
                               for (const auto& e : f.entities) out.append(from_json_value(nlohmann::json(e)));
                               return out;
                             })
      .def("to_dict", [](const nlu::SemanticFrame& f) { return from_json_value(nlohmann::json(f)); });
  m.def("parse", [](const std::string& text, const nlu::Lexicon& lex) { return nlu::parse(text, lex); },
        py::arg("utterance"), py::arg("lexicon"));

  m.def(
      "render",
      [](const py::list& acts, const std::string& templates, std::uint64_t seed) {
        auto action = to_json_value(acts).get<SystemAction>();
        return nlg::render(action, nlg::TemplateSet::parse_string(templates), seed);
      },
      py::arg("acts"), py::arg("templates"), py::arg("seed") = 0,
      "Renders a list of {\"act\", \"value\", \"class\", \"slots\"} dicts with template text.");

  py::class_<chatbot::EmbeddingIndex>(m, "ChatIndex")
      .def(py::init([](const std::vector<std::pair<std::string, std::string>>& pairs) {
             std::vector<chatbot::ExamplePair> rows;
             for (const auto& [prompt, response] : pairs) rows.push_back({prompt, response, {}});
             return chatbot::EmbeddingIndex::build(std::move(rows));
           }),
           py::arg("pairs"))
      .def_static("load", [](const std::filesystem::path& p) {
        return chatbot::EmbeddingIndex::build(chatbot::load_pairs(p));
      })
      .def("best_match",
           [](const chatbot::EmbeddingIndex& idx, const std::string& q) {
             auto match = idx.best_match(q);
             return py::make_tuple(match.row, match.score, match.response);
           })
      .def(
          "respond",
          [](const chatbot::EmbeddingIndex& idx, const std::string& q, double threshold) -> std::optional<std::string> {
            if (auto match = idx.respond(q, threshold)) return match->response;
            return std::nullopt;
          },
          py::arg("utterance"), py::arg("threshold") = chatbot::kDefaultThreshold);

  py::class_<PyPortal>(m, "Portal")
      .def(py::init<std::optional<std::filesystem::path>, std::uint64_t>(), py::arg("data_dir") = py::none(),
           py::arg("seed") = 0)
      .def("create_session", &PyPortal::create_session)
      .def("say", &PyPortal::say, py::arg("session_id"), py::arg("text"))
      .def("transcript", &PyPortal::transcript, py::arg("session_id"))
      .def("live_sessions", &PyPortal::live_sessions);
}
