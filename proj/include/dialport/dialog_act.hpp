#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace dialport {

enum class DialogAct {
  Ask,
  Inform,
  ConfirmExplicit,
  ConfirmImplicit,
  Hello,
  Bye,
  Handoff,
  Relay,
  Rephrase,
  Instruct,
};

/// Upper-case wire name, e.g. CONFIRM_IMPLICIT.
const char* to_string(DialogAct act);
std::optional<DialogAct> dialog_act_from_string(const std::string& name);

/// True for acts after which the system yields the floor to the user.
bool awaits_user(DialogAct act);

/// Content of a dialog act. `text` is the plain value (a concept name, a
/// surface value, or verbatim text for RELAY/INSTRUCT); `value_class` picks
/// the template family; `slots` fill named placeholders.
struct ActValue {
  std::string text;
  std::string value_class;
  std::map<std::string, std::string> slots;

  bool operator==(const ActValue&) const = default;
};

struct ActTuple {
  DialogAct act;
  ActValue value;

  bool operator==(const ActTuple&) const = default;
};

struct SystemAction {
  std::vector<ActTuple> acts;

  bool empty() const { return acts.empty(); }
  void add(DialogAct act, ActValue value = {}) { acts.push_back({act, std::move(value)}); }
  bool operator==(const SystemAction&) const = default;
};

void to_json(nlohmann::json& j, const ActTuple& t);
void from_json(const nlohmann::json& j, ActTuple& t);
void to_json(nlohmann::json& j, const SystemAction& a);
void from_json(const nlohmann::json& j, SystemAction& a);

}  // namespace dialport
