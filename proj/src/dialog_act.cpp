#include "dialport/dialog_act.hpp"

#include <array>
#include <stdexcept>
#include <utility>

namespace dialport {

namespace {

constexpr std::array<std::pair<DialogAct, const char*>, 10> kNames{{
    {DialogAct::Ask, "ASK"},
    {DialogAct::Inform, "INFORM"},
    {DialogAct::ConfirmExplicit, "CONFIRM_EXPLICIT"},
    {DialogAct::ConfirmImplicit, "CONFIRM_IMPLICIT"},
    {DialogAct::Hello, "HELLO"},
    {DialogAct::Bye, "BYE"},
    {DialogAct::Handoff, "HANDOFF"},
    {DialogAct::Relay, "RELAY"},
    {DialogAct::Rephrase, "REPHRASE"},
    {DialogAct::Instruct, "INSTRUCT"},
}};

}  // namespace

const char* to_string(DialogAct act) {
  for (const auto& [a, name] : kNames)
    if (a == act) return name;
  return "?";
}

std::optional<DialogAct> dialog_act_from_string(const std::string& name) {
  for (const auto& [a, n] : kNames)
    if (name == n) return a;
  return std::nullopt;
}

bool awaits_user(DialogAct act) {
  switch (act) {
    case DialogAct::Ask:
    case DialogAct::ConfirmExplicit:
    case DialogAct::Rephrase:
    case DialogAct::Instruct:
      return true;
    default:
      return false;
  }
}

void to_json(nlohmann::json& j, const ActTuple& t) {
  j = {{"act", to_string(t.act)}, {"value", t.value.text}};
  if (!t.value.value_class.empty()) j["class"] = t.value.value_class;
  if (!t.value.slots.empty()) j["slots"] = t.value.slots;
}

void from_json(const nlohmann::json& j, ActTuple& t) {
  auto act = dialog_act_from_string(j.at("act").get<std::string>());
  if (!act) throw std::invalid_argument("unknown dialog act " + j.at("act").dump());
  t.act = *act;
  t.value.text = j.value("value", "");
  t.value.value_class = j.value("class", "");
  t.value.slots = j.value("slots", std::map<std::string, std::string>{});
}

void to_json(nlohmann::json& j, const SystemAction& a) { j = a.acts; }

void from_json(const nlohmann::json& j, SystemAction& a) { a.acts = j.get<std::vector<ActTuple>>(); }

}  // namespace dialport
