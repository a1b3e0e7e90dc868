#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dialport/agent_client.hpp"
#include "dialport/chatbot.hpp"
#include "dialport/dialog_act.hpp"
#include "dialport/error.hpp"
#include "dialport/knowledge.hpp"
#include "dialport/nlu.hpp"
#include "dialport/ontology.hpp"
#include "dialport/task_tree.hpp"

namespace dialport::engine {

DIALPORT_DEFINE_ERROR(SessionEnded);
DIALPORT_DEFINE_ERROR(EmptyStack);
DIALPORT_DEFINE_ERROR(StepBudgetExceeded);
DIALPORT_DEFINE_ERROR(RemoteAgentFailure);
DIALPORT_DEFINE_ERROR(UnknownAgent);

struct StackFrame {
  std::shared_ptr<const TaskNode> node;
  std::size_t next_child = 0;
  int id = 0;
  /// Frame that pushed this one; -1 for frames pushed by tree transformation
  /// or at session start.
  int parent = -1;
  /// Ontology revision when the frame was pushed (for `informed`).
  std::uint64_t pushed_revision = 0;
  bool remote_ended = false;
  /// ChoiceAgency: a child was already chosen. Confirm/ask: already asked.
  bool done = false;
  /// Confirm frames: the attribute and the revision being confirmed.
  std::optional<ontology::AttributeRef> target;
  std::uint64_t target_revision = 0;
};

struct TurnRecord {
  int turn = 0;
  std::string utterance;
  std::vector<ontology::AttributeRef> touched;
  SystemAction action;
  /// Name of the agent that held the floor when the turn finished.
  std::string active_agent;
  std::optional<protocol::DialogReport> report;
};

struct DialogState {
  std::string session_id;
  int turn_count = 0;
  std::vector<StackFrame> stack;
  ontology::Ontology ontology;
  std::optional<nlu::SemanticFrame> last_frame;
  std::optional<protocol::AgentSession> active_remote;
  SystemAction pending_actions;
  std::vector<TurnRecord> history;

  bool ended = false;
  int next_frame_id = 0;
  int nonunderstanding_streak = 0;
  /// Values grounded by an implicit confirmation on the previous turn.
  std::vector<ontology::AttributeRef> implicit_pending;
  std::vector<ontology::AttributeRef> touched;
  bool progress = false;
  int last_steps = 0;
  std::vector<protocol::DialogReport> reports;
};

enum class StepKind { Emitted, AwaitUser, SubtaskPushed, Popped };

struct StepOutcome {
  StepKind kind = StepKind::Emitted;
  std::size_t popped = 0;
  std::string node_id;
};

struct Candidate {
  std::string node_id;
  double score = 0.0;
  std::size_t registration = 0;
};

/// Picks one of several subtrees. The shipped policy is deterministic; the
/// interface is where a learned policy would plug in.
class ChoicePolicy {
 public:
  virtual ~ChoicePolicy() = default;
  /// Index into `candidates`, which is never empty.
  virtual std::size_t choose(const std::vector<Candidate>& candidates) const = 0;
};

/// Highest score, then earliest registration, then node id.
class ScoreChoicePolicy final : public ChoicePolicy {
 public:
  std::size_t choose(const std::vector<Candidate>& candidates) const override;
};

enum class TransformKind { Pushed, NoCandidate };

struct TransformOutcome {
  TransformKind kind = TransformKind::NoCandidate;
  std::string node_id;
};

struct EngineConfig {
  std::string portal_agent = "skylar";
  /// Verbatim INSTRUCT text for the second non-understanding in a row.
  std::string capabilities = "I can help with the weather and restaurants.";
  double chatbot_threshold = chatbot::kDefaultThreshold;
  int step_budget = 256;
  double explicit_below = 0.4;
  double implicit_below = 0.8;
};

struct EngineResources {
  std::map<std::string, std::shared_ptr<const protocol::KnowledgeAgent>> knowledge;
  /// Keyed by RemotePool concept name.
  std::map<std::string, std::shared_ptr<protocol::AgentClient>> remotes;
  std::shared_ptr<const chatbot::EmbeddingIndex> chatbot;
  std::shared_ptr<const ChoicePolicy> policy;
};

/// The dialog manager. Holds only immutable shared configuration; all
/// per-session data lives in DialogState, so one engine serves any number
/// of sessions as long as each session's turns are serialized.
class DialogEngine {
 public:
  DialogEngine(std::shared_ptr<const TaskTree> tree, ontology::Ontology schema, EngineResources resources,
               EngineConfig config = {});

  std::pair<DialogState, SystemAction> start_session(const std::string& session_id) const;
  SystemAction run_turn(DialogState& state, const nlu::SemanticFrame& frame) const;

  // The steps of run_turn, exposed for tests.
  std::vector<ontology::AttributeRef> belief_update(DialogState& state, const nlu::SemanticFrame& frame) const;
  TransformOutcome tree_transformation(DialogState& state) const;
  void error_handle(DialogState& state, const nlu::SemanticFrame& frame) const;
  StepOutcome execute_top(DialogState& state) const;
  /// Forwards one utterance to the active remote agent. Throws
  /// RemoteAgentFailure after dropping the remote session.
  bool relay_to_remote(DialogState& state, const std::string& utterance) const;

  /// Whose turn it is from the user's point of view.
  std::string active_agent(const DialogState& state) const;
  bool predicate_holds(const DialogState& state, const StackFrame& frame) const;

  const TaskTree& tree() const { return *tree_; }
  const EngineConfig& config() const { return config_; }
  const ontology::Ontology& schema() const { return schema_; }

 private:
  void push(DialogState& state, std::shared_ptr<const TaskNode> node, int parent) const;
  std::size_t pop_with_descendants(DialogState& state, std::size_t index) const;
  StepOutcome run_primitive(DialogState& state, std::size_t index) const;
  StepOutcome call_remote(DialogState& state, std::size_t index) const;
  StepOutcome inform(DialogState& state, std::size_t index) const;
  StepOutcome confirm(DialogState& state, std::size_t index) const;
  void ladder(DialogState& state, const std::string& utterance, bool use_chatbot) const;
  void run_loop(DialogState& state) const;
  double trigger_score(const DialogState& state, const TaskNode& node) const;
  bool confirmable(const ontology::AttributeRef& ref) const;

  std::shared_ptr<const TaskTree> tree_;
  ontology::Ontology schema_;
  EngineResources resources_;
  EngineConfig config_;
};

}  // namespace dialport::engine
