#include "dialport/engine.hpp"

#include <algorithm>
#include <functional>
#include <set>

#include <spdlog/spdlog.h>

namespace dialport::engine {

namespace {

using ontology::AttributeRef;
using ontology::Grounding;

constexpr const char* kAffirm = "Affirm";
constexpr const char* kNegate = "Negate";
constexpr double kIntentAcceptance = 0.5;

bool top_intent_is(const nlu::SemanticFrame& frame, const char* label) {
  auto top = frame.top_intent();
  return top && top->label == label && top->probability >= kIntentAcceptance;
}

bool is_confirm(const StackFrame& f) {
  return f.node->kind == NodeKind::Agent && f.node->action.kind == PrimitiveKind::Confirm;
}

std::shared_ptr<const TaskNode> confirm_node(const AttributeRef& ref, ConfirmStrategy strategy) {
  auto node = std::make_shared<TaskNode>();
  node->id = "confirm:" + ref.concept_name + (ref.key == ontology::kValueKey ? "" : "." + ref.key);
  node->kind = NodeKind::Agent;
  node->action.kind = PrimitiveKind::Confirm;
  node->action.concept_name = ref.concept_name;
  node->action.strategy = strategy;
  return node;
}

}  // namespace

std::size_t ScoreChoicePolicy::choose(const std::vector<Candidate>& candidates) const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    const auto& b = candidates[best];
    if (c.score != b.score) {
      if (c.score > b.score) best = i;
      continue;
    }
    if (c.registration != b.registration) {
      if (c.registration < b.registration) best = i;
      continue;
    }
    if (c.node_id < b.node_id) best = i;
  }
  return best;
}

DialogEngine::DialogEngine(std::shared_ptr<const TaskTree> tree, ontology::Ontology schema,
                           EngineResources resources, EngineConfig config)
    : tree_(std::move(tree)), schema_(std::move(schema)), resources_(std::move(resources)), config_(std::move(config)) {
  if (!tree_) throw InvalidTree("engine needs a tree");
  validate_tree(*tree_->root(), &schema_);
  for (const auto& d : tree_->domains()) validate_tree(*d, &schema_);
  if (!resources_.policy) resources_.policy = std::make_shared<ScoreChoicePolicy>();
  std::set<const TaskNode*> seen;
  std::function<void(const TaskNode&)> check = [&](const TaskNode& node) {
    if (!seen.insert(&node).second) return;
    if (node.kind == NodeKind::Agent) {
      const auto& a = node.action;
      if (a.kind == PrimitiveKind::InformFromKnowledge && !resources_.knowledge.count(a.knowledge))
        throw InvalidTree("node '" + node.id + "' uses unknown knowledge agent '" + a.knowledge + "'");
      if (a.kind == PrimitiveKind::CallRemote && !resources_.remotes.count(a.concept_name))
        throw InvalidTree("node '" + node.id + "' calls remote '" + a.concept_name + "' with no client configured");
    }
    for (const auto& child : node.children) check(*child);
  };
  check(*tree_->root());
  for (const auto& d : tree_->domains()) check(*d);
}

std::pair<DialogState, SystemAction> DialogEngine::start_session(const std::string& session_id) const {
  DialogState state;
  state.session_id = session_id;
  state.ontology = schema_;
  push(state, tree_->root(), -1);
  run_loop(state);
  state.history.push_back({0, "", {}, state.pending_actions, active_agent(state), std::nullopt});
  return {state, state.pending_actions};
}

std::string DialogEngine::active_agent(const DialogState& state) const {
  return state.active_remote ? state.active_remote->agent_name : config_.portal_agent;
}

SystemAction DialogEngine::run_turn(DialogState& state, const nlu::SemanticFrame& frame) const {
  if (state.ended) throw SessionEnded("session '" + state.session_id + "' has ended");
  state.pending_actions = {};
  state.last_frame = frame;
  const auto reports_before = state.reports.size();

  if (state.active_remote) {
    ++state.turn_count;
    state.touched.clear();
    try {
      if (relay_to_remote(state, frame.utterance)) run_loop(state);
    } catch (const RemoteAgentFailure& e) {
      state.pending_actions.add(DialogAct::Handoff, {config_.portal_agent, "portal", {}});
      ladder(state, frame.utterance, false);
    }
  } else {
    belief_update(state, frame);
    tree_transformation(state);
    error_handle(state, frame);
    const auto& acts = state.pending_actions.acts;
    if (acts.empty() || !awaits_user(acts.back().act)) run_loop(state);
  }

  TurnRecord record{state.turn_count, frame.utterance, state.touched, state.pending_actions, active_agent(state),
                    std::nullopt};
  if (state.reports.size() > reports_before) record.report = state.reports.back();
  state.history.push_back(std::move(record));
  return state.pending_actions;
}

std::vector<AttributeRef> DialogEngine::belief_update(DialogState& state, const nlu::SemanticFrame& frame) const {
  ++state.turn_count;
  state.progress = false;
  state.touched.clear();
  const bool affirm = top_intent_is(frame, kAffirm);
  const bool negate = top_intent_is(frame, kNegate);

  if (!state.stack.empty() && (affirm || negate)) {
    const auto& top = state.stack.back();
    if (is_confirm(top) && top.done && top.target) {
      const auto* entry = state.ontology.entry(*top.target);
      if (entry && entry->grounding == Grounding::Updated && entry->revision == top.target_revision) {
        if (affirm) {
          state.ontology.ground(*top.target);
        } else {
          state.ontology.disconfirm(*top.target);
        }
        state.progress = true;
      }
    }
  }
  if (negate) {
    for (const auto& ref : state.implicit_pending) {
      const auto* entry = state.ontology.entry(ref);
      if (entry && entry->grounding == Grounding::Grounded) {
        state.ontology.disconfirm(ref);
        state.progress = true;
      }
    }
  }
  state.implicit_pending.clear();

  state.touched = state.ontology.apply_frame(frame, state.turn_count);
  if (!state.touched.empty()) state.progress = true;
  return state.touched;
}

double DialogEngine::trigger_score(const DialogState& state, const TaskNode& node) const {
  if (node.trigger.empty() || !state.ontology.contains(node.trigger)) return 0.0;
  double best = 0.0;
  for (const auto& [_, entry] : state.ontology.concept_named(node.trigger).attributes)
    if (entry.value) best = std::max(best, entry.confidence);
  return best;
}

TransformOutcome DialogEngine::tree_transformation(DialogState& state) const {
  std::set<std::string> touched;
  for (const auto& ref : state.touched) touched.insert(ref.concept_name);
  std::vector<Candidate> candidates;
  std::vector<std::shared_ptr<const TaskNode>> nodes;
  const auto& registered = tree_->candidates();
  for (std::size_t i = 0; i < registered.size(); ++i) {
    const auto& node = registered[i];
    if (!touched.count(node->trigger)) continue;
    const bool on_stack = std::any_of(state.stack.begin(), state.stack.end(),
                                      [&](const StackFrame& f) { return f.node.get() == node.get(); });
    if (on_stack) continue;
    candidates.push_back({node->id, trigger_score(state, *node), i});
    nodes.push_back(node);
  }
  if (candidates.empty()) return {TransformKind::NoCandidate, ""};
  const auto chosen = resources_.policy->choose(candidates);
  push(state, nodes.at(chosen), -1);
  state.progress = true;
  return {TransformKind::Pushed, candidates[chosen].node_id};
}

bool DialogEngine::confirmable(const AttributeRef& ref) const {
  if (!schema_.contains(ref.concept_name)) return false;
  const auto& subs = schema_.concept_named(ref.concept_name).subscriptions;
  return std::any_of(subs.begin(), subs.end(), [&](const ontology::Subscription& s) {
    return !s.entity_type.empty() && s.key == ref.key;
  });
}

void DialogEngine::error_handle(DialogState& state, const nlu::SemanticFrame& frame) const {
  // Misunderstanding: every updated-but-ungrounded user value.
  auto pending = state.ontology.ungrounded_updated();
  std::reverse(pending.begin(), pending.end());
  for (const auto& ref : pending) {
    const auto* entry = state.ontology.entry(ref);
    if (!confirmable(ref) || entry->confidence >= config_.implicit_below) {
      state.ontology.ground(ref);
      continue;
    }
    const auto strategy =
        entry->confidence < config_.explicit_below ? ConfirmStrategy::Explicit : ConfirmStrategy::Implicit;
    bool current = false;
    for (std::size_t i = state.stack.size(); i-- > 0;) {
      const auto& f = state.stack[i];
      if (!is_confirm(f) || !f.target || *f.target != ref) continue;
      if (f.target_revision == entry->revision) {
        current = true;
      } else {
        pop_with_descendants(state, i);
      }
    }
    if (current) continue;
    const int parent = state.stack.empty() ? -1 : state.stack.back().id;
    push(state, confirm_node(ref, strategy), parent);
    state.stack.back().target = ref;
    state.stack.back().target_revision = entry->revision;
  }

  // Non-understanding: nothing in the input moved the dialog forward.
  if (state.progress) {
    state.nonunderstanding_streak = 0;
  } else {
    ladder(state, frame.utterance, true);
  }
}

void DialogEngine::ladder(DialogState& state, const std::string& utterance, bool use_chatbot) const {
  if (use_chatbot && resources_.chatbot) {
    if (auto match = resources_.chatbot->respond(utterance, config_.chatbot_threshold)) {
      state.pending_actions.add(DialogAct::Relay, {match->response, "chatbot", {}});
      state.nonunderstanding_streak = 0;
      return;
    }
  }
  if (state.nonunderstanding_streak == 0) {
    state.pending_actions.add(DialogAct::Rephrase);
  } else {
    state.pending_actions.add(DialogAct::Instruct, {config_.capabilities, "", {}});
  }
  ++state.nonunderstanding_streak;
}

void DialogEngine::run_loop(DialogState& state) const {
  int steps = 0;
  while (!state.ended && !state.stack.empty() && !state.active_remote) {
    if (++steps > config_.step_budget)
      throw StepBudgetExceeded("turn " + std::to_string(state.turn_count) + " of session '" + state.session_id +
                               "' exceeded " + std::to_string(config_.step_budget) + " steps; top node '" +
                               state.stack.back().node->id + "'");
    if (execute_top(state).kind == StepKind::AwaitUser) break;
  }
  state.last_steps = steps;
  if (state.stack.empty()) state.ended = true;
}

void DialogEngine::push(DialogState& state, std::shared_ptr<const TaskNode> node, int parent) const {
  StackFrame frame;
  frame.node = std::move(node);
  frame.id = state.next_frame_id++;
  frame.parent = parent;
  frame.pushed_revision = state.ontology.revision();
  state.stack.push_back(std::move(frame));
}

std::size_t DialogEngine::pop_with_descendants(DialogState& state, std::size_t index) const {
  std::set<int> doomed{state.stack[index].id};
  for (std::size_t i = index + 1; i < state.stack.size(); ++i)
    if (doomed.count(state.stack[i].parent)) doomed.insert(state.stack[i].id);
  const auto before = state.stack.size();
  state.stack.erase(std::remove_if(state.stack.begin() + static_cast<std::ptrdiff_t>(index), state.stack.end(),
                                   [&](const StackFrame& f) { return doomed.count(f.id) != 0; }),
                    state.stack.end());
  return before - state.stack.size();
}

bool DialogEngine::predicate_holds(const DialogState& state, const StackFrame& frame) const {
  const auto& t = frame.node->termination;
  switch (t.kind) {
    case PredicateKind::Always:
      return true;
    case PredicateKind::Never:
      return false;
    case PredicateKind::RemoteEnded:
      return frame.remote_ended;
    case PredicateKind::Informed: {
      for (const auto& [_, entry] : state.ontology.concept_named(t.concept_name).attributes)
        if (entry.grounding == Grounding::Grounded && entry.revision > frame.pushed_revision) return true;
      return false;
    }
    case PredicateKind::AllGrounded: {
      if (!state.ontology.unmet_dependencies(t.concept_name).empty()) return false;
      const auto& c = state.ontology.concept_named(t.concept_name);
      return c.pool != ontology::Pool::User || c.grounding() == Grounding::Grounded;
    }
  }
  return false;
}

StepOutcome DialogEngine::execute_top(DialogState& state) const {
  if (state.stack.empty()) throw EmptyStack("execute on an empty stack");
  for (std::size_t i = 0; i < state.stack.size(); ++i) {
    if (predicate_holds(state, state.stack[i])) {
      auto id = state.stack[i].node->id;
      return {StepKind::Popped, pop_with_descendants(state, i), id};
    }
  }

  const std::size_t index = state.stack.size() - 1;
  auto& top = state.stack[index];
  const auto node = top.node;
  switch (node->kind) {
    case NodeKind::Agency: {
      if (top.next_child < node->children.size()) {
        auto child = node->children[top.next_child++];
        push(state, child, top.id);
        return {StepKind::SubtaskPushed, 0, child->id};
      }
      return {StepKind::Popped, pop_with_descendants(state, index), node->id};
    }
    case NodeKind::ChoiceAgency: {
      if (top.done) return {StepKind::Popped, pop_with_descendants(state, index), node->id};
      std::vector<Candidate> candidates;
      for (std::size_t i = 0; i < node->children.size(); ++i)
        candidates.push_back({node->children[i]->id, trigger_score(state, *node->children[i]), i});
      auto child = node->children[resources_.policy->choose(candidates)];
      top.done = true;
      push(state, child, top.id);
      return {StepKind::SubtaskPushed, 0, child->id};
    }
    case NodeKind::Agent:
      return run_primitive(state, index);
  }
  return {};
}

StepOutcome DialogEngine::run_primitive(DialogState& state, std::size_t index) const {
  const auto node = state.stack[index].node;
  const auto& a = node->action;
  switch (a.kind) {
    case PrimitiveKind::Emit:
      state.pending_actions.add(a.act, {a.text, a.value_class, {}});
      if (a.act == DialogAct::Bye) {
        state.stack.clear();
        state.ended = true;
      } else {
        pop_with_descendants(state, index);
      }
      return {StepKind::Emitted, 0, node->id};
    case PrimitiveKind::Ask:
      state.pending_actions.add(DialogAct::Ask, {a.concept_name, a.concept_name, {}});
      state.stack[index].done = true;
      return {StepKind::AwaitUser, 0, node->id};
    case PrimitiveKind::InformFromKnowledge:
      return inform(state, index);
    case PrimitiveKind::CallRemote:
      return call_remote(state, index);
    case PrimitiveKind::Confirm:
      return confirm(state, index);
  }
  return {};
}

StepOutcome DialogEngine::inform(DialogState& state, std::size_t index) const {
  const auto node = state.stack[index].node;
  const auto& a = node->action;
  const auto& agent = *resources_.knowledge.at(a.knowledge);

  ActValue value{"", a.concept_name, {}};
  std::vector<protocol::KnowledgeConstraint> constraints;
  for (const auto& [field, concept_name] : a.constraints) {
    const auto* entry = state.ontology.entry({concept_name, ontology::kValueKey});
    if (!entry || !entry->value || entry->grounding == Grounding::Disconfirmed) continue;
    constraints.push_back({field, protocol::ConstraintOp::Eq, *entry->value});
    value.slots[concept_name] = *entry->value;
  }
  std::vector<protocol::KnowledgeEntity> found;
  try {
    found = protocol::knowledge_query(agent, constraints);
  } catch (const Error& e) {
    spdlog::warn("knowledge agent '{}' failed: {}", a.knowledge, e.what());
  }
  if (found.empty()) {
    value.value_class = a.concept_name + "_none";
    value.text = "none";
  } else {
    for (const auto& [field, v] : found.front()) value.slots[field] = v;
    const auto& schema = agent.schema();
    value.text = schema.empty() ? "" : found.front().at(schema.front());
  }
  state.ontology.write({a.concept_name, ontology::kValueKey}, value.text, 1.0, Grounding::Grounded, state.turn_count);
  state.pending_actions.add(DialogAct::Inform, std::move(value));
  pop_with_descendants(state, index);
  return {StepKind::Emitted, 0, node->id};
}

StepOutcome DialogEngine::call_remote(DialogState& state, std::size_t index) const {
  const auto node = state.stack[index].node;
  const auto& name = node->action.concept_name;
  auto& client = *resources_.remotes.at(name);

  protocol::InitialState s0;
  s0.user_id = state.session_id;
  for (const auto& concept_name : state.ontology.pool(ontology::Pool::User)) {
    const ontology::AttributeRef ref{concept_name, ontology::kValueKey};
    if (!confirmable(ref)) continue;
    const auto* entry = state.ontology.entry(ref);
    if (!entry || !entry->value) continue;
    if (entry->grounding != Grounding::Grounded && entry->grounding != Grounding::Updated) continue;
    s0.known_slots[concept_name] = {*entry->value, entry->confidence};
  }

  try {
    auto [session, first] = client.new_call(state.session_id, s0);
    session.agent_name = name;
    state.pending_actions.add(DialogAct::Handoff, {name, "remote", {}});
    state.pending_actions.add(DialogAct::Relay, {first, "remote", {}});
    state.active_remote = std::move(session);
    return {StepKind::AwaitUser, 0, node->id};
  } catch (const Error& e) {
    spdlog::warn("session {}: remote agent '{}' refused or failed new_call: {}", state.session_id, name, e.what());
    state.pending_actions.add(DialogAct::Inform, {name, "remote_unavailable", {}});
    pop_with_descendants(state, index);
    return {StepKind::Emitted, 0, node->id};
  }
}

StepOutcome DialogEngine::confirm(DialogState& state, std::size_t index) const {
  auto& frame = state.stack[index];
  const auto node = frame.node;
  const auto& a = node->action;
  if (!frame.target) {
    const AttributeRef ref{a.concept_name, ontology::kValueKey};
    const auto* entry = state.ontology.entry(ref);
    frame.target = ref;
    frame.target_revision = entry ? entry->revision : 0;
  }
  const auto ref = *frame.target;
  const auto* entry = state.ontology.entry(ref);
  if (!entry || !entry->value || entry->grounding != Grounding::Updated || entry->revision != frame.target_revision)
    return {StepKind::Popped, pop_with_descendants(state, index), node->id};

  auto strategy = a.strategy;
  if (strategy == ConfirmStrategy::Auto) {
    if (entry->confidence >= config_.implicit_below) {
      state.ontology.ground(ref);
      return {StepKind::Popped, pop_with_descendants(state, index), node->id};
    }
    strategy = entry->confidence < config_.explicit_below ? ConfirmStrategy::Explicit : ConfirmStrategy::Implicit;
  }
  ActValue value{*entry->value, ref.concept_name, {{"concept", ref.concept_name}}};
  if (strategy == ConfirmStrategy::Implicit) {
    state.pending_actions.add(DialogAct::ConfirmImplicit, std::move(value));
    state.ontology.ground(ref);
    state.implicit_pending.push_back(ref);
    pop_with_descendants(state, index);
    return {StepKind::Emitted, 0, node->id};
  }
  state.pending_actions.add(DialogAct::ConfirmExplicit, std::move(value));
  frame.done = true;
  return {StepKind::AwaitUser, 0, node->id};
}

bool DialogEngine::relay_to_remote(DialogState& state, const std::string& utterance) const {
  if (!state.active_remote) throw RemoteAgentFailure("no active remote agent");
  auto& session = *state.active_remote;
  const auto name = session.agent_name;
  auto remote_frame = [&]() -> std::optional<std::size_t> {
    for (std::size_t i = state.stack.size(); i-- > 0;) {
      const auto& n = *state.stack[i].node;
      if (n.kind == NodeKind::Agent && n.action.kind == PrimitiveKind::CallRemote && n.action.concept_name == name)
        return i;
    }
    return std::nullopt;
  };

  protocol::NextResponse response;
  try {
    response = resources_.remotes.at(name)->next(session, utterance);
  } catch (const Error& e) {
    spdlog::warn("session {}: remote agent '{}' failed: {}", state.session_id, name, e.what());
    state.active_remote.reset();
    if (auto i = remote_frame()) pop_with_descendants(state, *i);
    throw RemoteAgentFailure("remote agent '" + name + "' failed: " + e.what());
  }

  state.pending_actions.add(DialogAct::Relay, {response.reply, "remote", {}});
  if (!response.ended) return false;

  auto report = response.report;
  if (!report) {
    spdlog::warn("session {}: remote agent '{}' ended without a dialog report", state.session_id, name);
    report = protocol::DialogReport{session.session_token, {}, protocol::Outcome::Error, {{"missing", true}}};
  }
  state.reports.push_back(std::move(*report));
  state.active_remote.reset();
  if (auto i = remote_frame()) {
    state.stack[*i].remote_ended = true;
    pop_with_descendants(state, *i);
  }
  state.pending_actions.add(DialogAct::Handoff, {config_.portal_agent, "portal", {}});
  return true;
}

}  // namespace dialport::engine
