// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <future>
#include <iostream>
#include <latch>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dialport/agents.hpp"
#include "dialport/chatbot.hpp"
#include "dialport/cli.hpp"
#include "dialport/conformance.hpp"
#include "dialport/deployment.hpp"
#include "dialport/engine.hpp"
#include "dialport/nlg.hpp"
#include "dialport/nlu.hpp"
#include "dialport/portal.hpp"
#include "dialport/text.hpp"

#include "fixtures.hpp"
#include "oracles.hpp"

namespace {

using namespace dialport;
namespace eng = dialport::engine;
namespace ont = dialport::ontology;

struct Verdict {
  bool pass = true;
  std::string detail;
};

/// Collects failures; the first few are kept for the report line.
class Failures {
 public:
  void add(const std::string& what) {
    if (count_++ < 3) notes_.push_back(what);
  }
  bool empty() const { return count_ == 0; }
  Verdict verdict(const std::string& ok) const {
    if (count_ == 0) return {true, ok};
    std::ostringstream out;
    out << count_ << " failure(s)";
    for (const auto& n : notes_) out << "; " << n;
    return {false, out.str()};
  }

 private:
  std::size_t count_ = 0;
  std::vector<std::string> notes_;
};

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(4);
  out << v;
  return out.str();
}

// ---------------------------------------------------------------------------

Verdict fig5_replay() {
  const std::vector<std::string> expected_agents = {"skylar",    "skylar", "skylar", "cambridge",
                                                    "cambridge", "skylar", "skylar"};
  auto portal = fixtures::portal(fixtures::shipped());
  auto script = cli::load_script(fixtures::data_dir() / "scripts" / "tour.txt");
  Failures f;
  if (script.steps.size() != expected_agents.size())
    f.add("script has " + std::to_string(script.steps.size()) + " steps");
  for (std::size_t i = 0; i < std::min(script.steps.size(), expected_agents.size()); ++i)
    if (script.steps[i].expect_agent != expected_agents[i]) f.add("script step " + std::to_string(i + 1) + " agent");

  auto report = cli::replay(script, *portal);
  for (auto i : report.failed)
    for (const auto& p : report.steps[i].problems) f.add("step " + std::to_string(i + 1) + ": " + p);

  // Relayed utterances are those sent while the remote agent held the floor.
  std::vector<std::string> relayed;
  std::string holder = "skylar";
  for (std::size_t i = 0; i < report.steps.size(); ++i) {
    if (holder == "cambridge") relayed.push_back(script.steps[i].send);
    holder = report.steps[i].active_agent;
  }
  if (relayed.empty()) f.add("no utterance was relayed");
  if (!report.steps.empty() && !report.steps.back().ended) f.add("session did not end on bye");

  auto transcript = portal->get_transcript(report.session_id);
  std::vector<protocol::DialogReport> reports;
  for (const auto& e : transcript)
    if (e.report) reports.push_back(*e.report);
  if (reports.size() != 1) {
    f.add(std::to_string(reports.size()) + " reports in transcript");
  } else {
    if (reports[0].user_texts() != relayed) f.add("report user turns differ from relayed utterances");
    if (reports[0].outcome != protocol::Outcome::Completed) f.add("report outcome is not completed");
  }
  return f.verdict(std::to_string(report.steps.size()) + " turns attributed as scripted, report holds " +
                   std::to_string(relayed.size()) + " relayed utterances");
}

// ---------------------------------------------------------------------------

Verdict table1_frame() {
  auto lexicon = nlu::load_lexicon(fixtures::data_dir() / "lexicon.txt");
  auto frame = nlu::parse("Recommend a restaurant in Pittsburgh", lexicon);
  Failures f;
  auto d = frame.top_domain();
  auto i = frame.top_intent();
  if (!d || d->label != "Restaurant") f.add("argmax domain is not Restaurant");
  if (!i || i->label != "Request") f.add("argmax intent is not Request");
  const auto* e = frame.find_entity("Location");
  if (!e || e->value != "Pittsburgh") f.add("no (Location, Pittsburgh) entity");
  auto prob = [](const std::map<std::string, double>& m, const std::string& k) {
    auto it = m.find(k);
    return it == m.end() ? 0.0 : it->second;
  };
  const struct {
    const std::map<std::string, double>* map;
    const char* label;
    double expected;
  } rows[] = {{&frame.domains, "Restaurant", 0.95},
              {&frame.domains, "Hotel", 0.05},
              {&frame.intents, "Request", 0.9},
              {&frame.intents, "Inform", 0.1}};
  std::string detail;
  for (const auto& r : rows) {
    const double p = prob(*r.map, r.label);
    if (std::abs(p - r.expected) > 0.01) f.add(std::string(r.label) + "=" + fmt(p) + " vs " + fmt(r.expected));
    detail += std::string(detail.empty() ? "" : " ") + r.label + "=" + fmt(p);
  }
  return f.verdict(detail);
}

// ---------------------------------------------------------------------------

Verdict nlg_example() {
  const std::string expected = "I believe you said Pittsburgh. What kind of food do you want?";
  auto templates = nlg::load_templates(fixtures::data_dir() / "templates.txt");
  SystemAction action;
  action.add(DialogAct::ConfirmImplicit, {"Pittsburgh", "location", {}});
  action.add(DialogAct::Ask, {"food_type", "food_type", {}});
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    auto text = nlg::render(action, templates, seed);
    if (text != expected) return {false, "seed " + std::to_string(seed) + " gave \"" + text + "\""};
  }
  return {true, "\"" + expected + "\""};
}

// ---------------------------------------------------------------------------

/// Wraps an agent and never sends a report.
class NoReportAgent final : public protocol::AgentHandler {
 public:
  explicit NoReportAgent(std::shared_ptr<protocol::AgentHandler> inner) : inner_(std::move(inner)) {}
  std::string on_new_call(const std::string& token, const std::string& user_id,
                          const protocol::InitialState& s0) override {
    return inner_->on_new_call(token, user_id, s0);
  }
  protocol::NextReply on_next(const std::string& token, const std::string& utterance) override {
    auto r = inner_->on_next(token, utterance);
    r.report.reset();
    return r;
  }

 private:
  std::shared_ptr<protocol::AgentHandler> inner_;
};

std::string failing_checks(const conformance::ConformanceReport& r) {
  std::string out;
  for (const auto& c : r.checks)
    if (!c.passed) out += (out.empty() ? "" : ",") + c.name;
  return out.empty() ? "none" : out;
}

Verdict protocol_conformance() {
  auto d = fixtures::shipped();
  Failures f;
  auto reference = conformance::run_conformance(
      resolve_endpoint("local://reference", d->restaurants, fixtures::fixed_clock));
  if (reference.checks.size() != 4) f.add("expected 4 checks");
  if (!reference.all_passed()) f.add("reference agent failed " + failing_checks(reference));

  auto broken_server = std::make_shared<protocol::AgentServer>(
      std::make_shared<NoReportAgent>(agents::reference_remote_agent(d->restaurants, fixtures::fixed_clock)),
      fixtures::fixed_clock);
  auto broken = conformance::run_conformance(protocol::local_transport("broken", broken_server));
  if (failing_checks(broken) != conformance::kReportOnEnd)
    f.add("agent behind the server kit failed " + failing_checks(broken));

  // Same agent without the server kit: the report field is stripped on the wire.
  auto kit = std::make_shared<protocol::AgentServer>(
      agents::reference_remote_agent(d->restaurants, fixtures::fixed_clock), fixtures::fixed_clock);
  auto raw = std::make_shared<protocol::LocalTransport>("raw", [kit](const std::string& path, const std::string& body) {
    auto r = kit->handle(path, body);
    if (path == "/next" && r.status == 200) {
      auto j = nlohmann::json::parse(r.body);
      j.erase("report");
      r.body = j.dump();
    }
    return r;
  });
  auto stripped = conformance::run_conformance(raw);
  if (failing_checks(stripped) != conformance::kReportOnEnd)
    f.add("raw agent failed " + failing_checks(stripped));
  return f.verdict("reference passes all 4; report-less agents fail only " + std::string(conformance::kReportOnEnd));
}

// ---------------------------------------------------------------------------

Verdict chatbot_gate() {
  auto pairs = chatbot::load_pairs(fixtures::data_dir() / "chat_pairs.tsv");
  auto facts = chatbot::load_pairs(fixtures::data_dir() / "facts.tsv");
  pairs.insert(pairs.end(), facts.begin(), facts.end());
  if (pairs.size() != 50) return {false, "fixture has " + std::to_string(pairs.size()) + " pairs"};
  auto index = chatbot::EmbeddingIndex::build(pairs);
  std::vector<std::string> prompts;
  for (const auto& p : pairs) prompts.push_back(p.prompt);
  oracle::BruteForceIndex brute(prompts);

  std::vector<std::string> queries;
  std::vector<std::string> vocab;
  for (const auto& [t, _] : brute.idf()) vocab.push_back(t);
  for (const auto& p : prompts) {
    auto w = oracle::tokens(p);
    queries.push_back(p);
    queries.push_back(p + " please");
    queries.push_back(p + " zzyzx");
    std::string rev, shorter;
    for (auto it = w.rbegin(); it != w.rend(); ++it) rev += *it + " ";
    for (std::size_t i = 0; i + 1 < w.size(); ++i) shorter += w[i] + " ";
    queries.push_back(rev);
    queries.push_back(shorter);
    queries.push_back(text::to_upper(p));
  }
  std::mt19937_64 rng(5);
  for (int i = 0; i < 400; ++i) {
    std::string q;
    const int n = 1 + static_cast<int>(rng() % 5);
    for (int k = 0; k < n; ++k) q += vocab[rng() % vocab.size()] + " ";
    queries.push_back(q);
  }
  queries.push_back("");
  queries.push_back("qwerty asdf");

  Failures f;
  std::size_t answered = 0;
  for (const auto& q : queries) {
    auto [row, score] = brute.best(q);
    auto m = index.best_match(q);
    if (m.row != row) f.add("row " + std::to_string(m.row) + " vs " + std::to_string(row) + " for \"" + q + "\"");
    if (std::abs(m.score - score) > 1e-9) f.add("score " + fmt(m.score) + " vs " + fmt(score) + " for \"" + q + "\"");
    auto r = index.respond(q, 0.8);
    if (r.has_value() != (score > 0.8)) f.add("gate disagrees for \"" + q + "\"");
    if (r) {
      ++answered;
      if (r->response != pairs[row].response) f.add("wrong response for \"" + q + "\"");
    }
  }
  return f.verdict(std::to_string(queries.size()) + " queries, " + std::to_string(answered) +
                   " answered, rows and scores match the brute-force oracle");
}

// ---------------------------------------------------------------------------
// Engine properties.

struct World {
  ont::Ontology schema;
  std::vector<std::string> names;
  oracle::Graph deps;
};

World random_world(std::mt19937_64& rng) {
  World w;
  for (int i = 0; i < 5; ++i) {
    ont::Concept c;
    c.name = "c" + std::to_string(i);
    c.pool = ont::Pool::User;
    for (int j = 0; j < i; ++j)
      if (rng() % 4 == 0) c.dependencies.push_back("c" + std::to_string(j));
    w.deps.out[c.name] = {c.dependencies.begin(), c.dependencies.end()};
    w.names.push_back(c.name);
    w.schema.add_concept(c);
  }
  return w;
}

/// Mirror of the attribute state, kept by the test alone.
struct Model {
  const World* world = nullptr;
  std::map<std::string, bool> grounded;
  std::map<std::string, std::uint64_t> revision_of;
  std::uint64_t revision = 0;

  bool all_grounded(const std::string& c) const {
    for (const auto& n : world->names)
      if (world->deps.reaches(c, n) && !grounded.count(n)) return false;
    return true;
  }
  bool informed(const std::string& c, std::uint64_t pushed) const {
    return grounded.count(c) && revision_of.at(c) > pushed;
  }
  bool holds(const eng::TaskNode& node, std::uint64_t pushed) const {
    const auto& t = node.termination;
    switch (t.kind) {
      case eng::PredicateKind::Always: return true;
      case eng::PredicateKind::Never: return false;
      case eng::PredicateKind::RemoteEnded: return false;
      case eng::PredicateKind::AllGrounded: return all_grounded(t.concept_name);
      case eng::PredicateKind::Informed: return informed(t.concept_name, pushed);
    }
    return false;
  }
};

/// One random write or grounding, applied to both the state and the model.
void mutate(std::mt19937_64& rng, const World& w, Model& m, eng::DialogState& s) {
  const auto& c = w.names[rng() % w.names.size()];
  const ont::AttributeRef ref{c, ont::kValueKey};
  switch (rng() % 3) {
    case 0:
      s.ontology.write(ref, "v", 1.0, ont::Grounding::Grounded, 0);
      m.revision_of[c] = ++m.revision;
      m.grounded[c] = true;
      break;
    case 1:
      s.ontology.write(ref, "v", 0.5, ont::Grounding::Updated, 0);
      m.revision_of[c] = ++m.revision;
      m.grounded.erase(c);
      break;
    default:
      if (m.revision_of.count(c)) {
        s.ontology.ground(ref);
        m.grounded[c] = true;
      }
  }
}

eng::Termination random_termination(std::mt19937_64& rng, const World& w) {
  const auto roll = rng() % 20;
  const auto& c = w.names[rng() % w.names.size()];
  if (roll == 0) return {eng::PredicateKind::Always, ""};
  if (roll < 6) return {eng::PredicateKind::Never, ""};
  if (roll < 16) return {eng::PredicateKind::AllGrounded, c};
  return {eng::PredicateKind::Informed, c};
}

std::shared_ptr<const eng::TaskTree> random_tree(std::mt19937_64& rng, const World& w, int max_nodes) {
  const int n = 2 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_nodes - 1));
  std::vector<std::shared_ptr<eng::TaskNode>> nodes;
  std::vector<std::size_t> agencies{0};
  auto root = std::make_shared<eng::TaskNode>();
  root->id = "n0";
  root->kind = eng::NodeKind::Agency;
  nodes.push_back(root);
  for (int i = 1; i < n; ++i) {
    auto node = std::make_shared<eng::TaskNode>();
    node->id = "n" + std::to_string(i);
    node->kind = rng() % 3 == 0 ? eng::NodeKind::Agency : eng::NodeKind::Agent;
    nodes[agencies[rng() % agencies.size()]]->children.push_back(node);
    if (node->kind == eng::NodeKind::Agency) agencies.push_back(nodes.size());
    nodes.push_back(node);
  }
  for (auto& node : nodes) {
    if (node->kind == eng::NodeKind::Agency && node->children.empty()) node->kind = eng::NodeKind::Agent;
    node->termination = random_termination(rng, w);
    if (node->kind != eng::NodeKind::Agent) continue;
    if (rng() % 4 == 0) {
      node->action.kind = eng::PrimitiveKind::Emit;
      node->action.act = DialogAct::Inform;
      node->action.text = node->id;
    } else {
      node->action.kind = eng::PrimitiveKind::Ask;
      node->action.concept_name = w.names[rng() % w.names.size()];
    }
  }
  return std::make_shared<const eng::TaskTree>(root, std::vector<std::shared_ptr<const eng::TaskNode>>{}, &w.schema);
}

std::vector<int> ids(const std::vector<eng::StackFrame>& stack) {
  std::vector<int> out;
  for (const auto& f : stack) out.push_back(f.id);
  return out;
}
std::vector<int> ids(const std::vector<oracle::Frame>& stack) {
  std::vector<int> out;
  for (const auto& f : stack) out.push_back(f.id);
  return out;
}

/// Structural invariants every stack must satisfy.
std::string stack_problem(const std::vector<eng::StackFrame>& stack) {
  for (std::size_t i = 0; i < stack.size(); ++i) {
    const auto& f = stack[i];
    if (i > 0 && stack[i - 1].id >= f.id) return "frame ids not increasing";
    if (f.parent == -1) continue;
    auto p = std::find_if(stack.begin(), stack.begin() + static_cast<std::ptrdiff_t>(i),
                          [&](const eng::StackFrame& g) { return g.id == f.parent; });
    if (p == stack.begin() + static_cast<std::ptrdiff_t>(i)) return "parent not below frame " + f.node->id;
    if (f.node->kind == eng::NodeKind::Agent && f.node->action.kind == eng::PrimitiveKind::Confirm) continue;
    if (p->node->kind == eng::NodeKind::Agency) {
      if (p->next_child == 0 || p->node->children[p->next_child - 1] != f.node)
        return "frame " + f.node->id + " is not the latest child of " + p->node->id;
    } else if (std::find(p->node->children.begin(), p->node->children.end(), f.node) == p->node->children.end()) {
      return "frame " + f.node->id + " is not a child of " + p->node->id;
    }
  }
  return "";
}

/// Runs a random tree from its root; checks left-to-right pushes, stack
/// invariants and every pop against the reference cascade.
void discipline_case(std::mt19937_64& rng, Failures& f) {
  auto w = random_world(rng);
  auto tree = random_tree(rng, w, 15);
  eng::DialogEngine engine(tree, w.schema, {});
  Model m{&w, {}, {}, 0};
  eng::DialogState s;
  s.session_id = "p";
  s.ontology = w.schema;
  eng::StackFrame root;
  root.node = tree->root();
  s.stack.push_back(root);
  s.next_frame_id = 1;
  std::map<int, std::uint64_t> pushed_at{{0, 0}};
  std::map<int, std::size_t> pushes;

  for (int step = 0; step < 300 && !s.stack.empty(); ++step) {
    std::vector<oracle::Frame> expect;
    for (const auto& fr : s.stack) expect.push_back({fr.id, fr.parent, m.holds(*fr.node, pushed_at[fr.id])});
    const bool cascade = oracle::cascade_step(expect);
    const auto before = s.stack;
    const auto& top = before.back();
    auto out = engine.execute_top(s);
    if (cascade) {
      if (out.kind != eng::StepKind::Popped || ids(s.stack) != ids(expect)) {
        f.add("cascade mismatch at step " + std::to_string(step));
        return;
      }
    } else {
      switch (out.kind) {
        case eng::StepKind::SubtaskPushed: {
          const auto k = pushes[top.id]++;
          if (s.stack.size() != before.size() + 1 || s.stack.back().parent != top.id ||
              k >= top.node->children.size() || s.stack.back().node != top.node->children[k]) {
            f.add("push out of left-to-right order under " + top.node->id);
            return;
          }
          pushed_at[s.stack.back().id] = m.revision;
          break;
        }
        case eng::StepKind::Popped:
          if (top.node->kind != eng::NodeKind::Agency || pushes[top.id] != top.node->children.size() ||
              s.stack.size() != before.size() - 1) {
            f.add("unexpected pop of " + top.node->id);
            return;
          }
          break;
        case eng::StepKind::Emitted:
          if (top.node->action.kind != eng::PrimitiveKind::Emit || s.stack.size() != before.size() - 1) {
            f.add("unexpected emit from " + top.node->id);
            return;
          }
          break;
        case eng::StepKind::AwaitUser:
          if (top.node->action.kind != eng::PrimitiveKind::Ask) f.add("await from a non-ask node");
          mutate(rng, w, m, s);
          break;
      }
    }
    if (auto p = stack_problem(s.stack); !p.empty()) {
      f.add(p);
      return;
    }
  }
}

/// Arbitrary stacks, including frames pushed by tree transformation
/// (parent -1) interleaved with nested ones.
void cascade_case(std::mt19937_64& rng, Failures& f) {
  auto w = random_world(rng);
  auto tree = random_tree(rng, w, 15);
  eng::DialogEngine engine(tree, w.schema, {});
  Model m{&w, {}, {}, 0};
  eng::DialogState s;
  s.session_id = "c";
  s.ontology = w.schema;
  const int writes = static_cast<int>(rng() % 8);
  for (int i = 0; i < writes; ++i) mutate(rng, w, m, s);

  std::vector<std::shared_ptr<const eng::TaskNode>> nodes;
  for (std::size_t i = 0; i < tree->size(); ++i) nodes.push_back(nullptr);
  std::function<void(const std::shared_ptr<const eng::TaskNode>&)> collect = [&](const auto& n) {
    nodes[static_cast<std::size_t>(std::stoi(n->id.substr(1)))] = n;
    for (const auto& c : n->children) collect(c);
  };
  collect(tree->root());

  const auto depth = 1 + rng() % 12;
  std::map<int, std::uint64_t> pushed_at;
  for (std::size_t i = 0; i < depth; ++i) {
    eng::StackFrame fr;
    fr.node = nodes[rng() % nodes.size()];
    fr.id = static_cast<int>(i * 2 + rng() % 2);
    fr.parent = (i == 0 || rng() % 3 == 0) ? -1 : s.stack[rng() % s.stack.size()].id;
    fr.pushed_revision = rng() % (m.revision + 1);
    pushed_at[fr.id] = fr.pushed_revision;
    s.stack.push_back(fr);
  }
  s.next_frame_id = static_cast<int>(depth * 2 + 2);

  while (!s.stack.empty()) {
    std::vector<oracle::Frame> expect;
    for (const auto& fr : s.stack) {
      const bool h = m.holds(*fr.node, pushed_at[fr.id]);
      if (engine.predicate_holds(s, fr) != h) {
        f.add("predicate of " + fr.node->id + " disagrees with the reference");
        return;
      }
      expect.push_back({fr.id, fr.parent, h});
    }
    if (!oracle::cascade_step(expect)) return;
    auto out = engine.execute_top(s);
    if (out.kind != eng::StepKind::Popped || ids(s.stack) != ids(expect)) {
      f.add("cascade pops differ from the reference interpreter");
      return;
    }
  }
}

const std::vector<std::string>& utterance_pool() {
  static const std::vector<std::string> pool = {
      "what is the weather",
      "what is the weather in Boston tomorrow",
      "weather in Seattle on friday",
      "forecast for Chicago",
      "Pittsburgh",
      "New York",
      "tomorrow",
      "today",
      "the day after tomorrow",
      "saturday",
      "yes",
      "no",
      "I am looking for a restaurant",
      "recommend a restaurant in Pittsburgh",
      "I want cheap thai food in Boston",
      "thai please",
      "italian",
      "something cheap",
      "expensive",
      "never mind",
      "hello",
      "who founded microsoft",
      "you are smart",
      "blah blah",
      "hotel room",
      "asdf",
      "bye",
  };
  return pool;
}

std::string shipped_case(std::mt19937_64& rng, const Deployment& d, int& max_steps) {
  const auto& pool = utterance_pool();
  auto [s, action] = d.engine->start_session("s");
  max_steps = std::max(max_steps, s.last_steps);
  const int turns = 1 + static_cast<int>(rng() % 12);
  for (int t = 0; t < turns && !s.ended; ++t) {
    const auto& utt = pool[rng() % pool.size()];
    try {
      d.engine->run_turn(s, d.understander->understand(utt));
    } catch (const eng::StepBudgetExceeded& e) {
      return std::string("budget exceeded: ") + e.what();
    }
    max_steps = std::max(max_steps, s.last_steps);
    if (s.last_steps > d.engine->config().step_budget) return "last_steps above the budget";
    if (auto p = stack_problem(s.stack); !p.empty()) return p + " after \"" + utt + "\"";
    if (!s.ended && s.stack.empty()) return "empty stack on a live session";
  }
  return "";
}

std::string masked_transcript(const portal::Portal& p, const std::string& id) {
  std::string out;
  for (const auto& e : p.get_transcript(id)) {
    auto j = portal::to_json(e, "");
    if (!j["report"].is_null()) {
      j["report"]["session_token"] = "";
      if (j["report"]["extras"].contains("user_id")) j["report"]["extras"]["user_id"] = "";
    }
    out += j.dump() + "\n";
  }
  return out;
}

Verdict engine_properties() {
  const auto start = std::chrono::steady_clock::now();
  constexpr int kCases = 1000;
  std::mt19937_64 rng(20250602);
  Failures discipline, cascade, budget, determinism;

  for (int i = 0; i < kCases; ++i) discipline_case(rng, discipline);
  for (int i = 0; i < kCases; ++i) cascade_case(rng, cascade);

  auto d = fixtures::shipped();
  int max_steps = 0;
  for (int i = 0; i < kCases; ++i)
    if (auto p = shipped_case(rng, *d, max_steps); !p.empty()) budget.add(p);

  auto pa = fixtures::portal(fixtures::shipped(), 17);
  auto pb = fixtures::portal(fixtures::shipped(), 17);
  const auto& pool = utterance_pool();
  for (int i = 0; i < kCases; ++i) {
    std::vector<std::string> script;
    const int n = 1 + static_cast<int>(rng() % 8);
    for (int k = 0; k < n; ++k) script.push_back(pool[rng() % pool.size()]);
    auto run = [&](portal::Portal& p) {
      auto id = p.create_session().session_id;
      for (const auto& u : script)
        if (p.post_utterance(id, u).ended) break;
      return masked_transcript(p, id);
    };
    if (run(*pa) != run(*pb)) determinism.add("script " + std::to_string(i) + " diverged");
  }

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  Failures all;
  auto note = [&](const char* name, const Failures& f) {
    auto v = f.verdict("");
    if (!v.pass) all.add(std::string(name) + ": " + v.detail);
  };
  note("stack discipline", discipline);
  note("termination cascade", cascade);
  note("step budget", budget);
  note("replay determinism", determinism);
  if (secs > 60) all.add("took " + fmt(secs) + " s");
  return all.verdict(std::to_string(kCases) + " cases x 4 properties in " + fmt(secs) +
                     " s, max steps per turn " + std::to_string(max_steps));
}

// ---------------------------------------------------------------------------

Verdict ontology_fuzz() {
  std::mt19937_64 rng(7);
  Failures f;
  std::size_t insertions = 0, cycles = 0;
  auto library_graph = [](const ont::Ontology& o) {
    oracle::Graph g;
    for (const auto& [name, c] : o.concepts()) g.out[name] = {c.dependencies.begin(), c.dependencies.end()};
    return g;
  };
  auto order_ok = [](const ont::Ontology& o) {
    auto order = o.topological_order();
    if (order.size() != o.concepts().size()) return false;
    std::map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
    for (const auto& [name, c] : o.concepts())
      for (const auto& d : c.dependencies)
        if (!pos.count(d) || !pos.count(name) || pos[d] >= pos[name]) return false;
    return true;
  };
  const ont::Pool pools[] = {ont::Pool::Agent, ont::Pool::User, ont::Pool::Remote};

  for (int round = 0; round < 500; ++round) {
    ont::Ontology o;
    oracle::Graph g;
    std::vector<std::string> names;
    const int n = 3 + static_cast<int>(rng() % 20);
    for (int i = 0; i < n; ++i) {
      ont::Concept c;
      c.name = "k" + std::to_string(i);
      c.pool = pools[rng() % 3];
      for (const auto& other : names)
        if (rng() % 5 == 0) c.dependencies.push_back(other);
      o.add_concept(c);
      g.out[c.name] = {c.dependencies.begin(), c.dependencies.end()};
      names.push_back(c.name);
      ++insertions;
      for (int e = 0; e < 2; ++e) {
        const auto& a = names[rng() % names.size()];
        const auto& b = names[rng() % names.size()];
        if (a == b || g.reaches(b, a)) continue;
        o.add_dependency(a, b);
        g.out[a].insert(b);
        ++insertions;
      }
      auto lg = library_graph(o);
      if (lg.out != g.out) f.add("dependency sets diverged in round " + std::to_string(round));
      if (!lg.acyclic() || !order_ok(o)) f.add("not a DAG after insertion in round " + std::to_string(round));
    }
    // Cycle attempts: every (a, b) with b reaching a, including self loops.
    std::vector<std::pair<std::string, std::string>> closing;
    for (const auto& a : names)
      for (const auto& b : names)
        if (g.reaches(b, a)) closing.emplace_back(a, b);
    for (int k = 0; k < 4; ++k) {
      auto [a, b] = closing[rng() % closing.size()];
      const auto before = library_graph(o).out;
      ++cycles;
      try {
        o.add_dependency(a, b);
        f.add("no CycleIntroduced for " + a + " -> " + b);
      } catch (const ont::CycleIntroduced&) {
      } catch (const std::exception& e) {
        f.add(std::string("wrong error ") + e.what());
      }
      if (library_graph(o).out != before) f.add("failed cycle attempt changed the graph");
    }
    // Same attempt through a configuration document.
    nlohmann::json doc = {{"concepts", nlohmann::json::array()}};
    for (const auto& [name, deps] : g.out)
      doc["concepts"].push_back({{"name", name}, {"pool", "agent"}, {"deps", deps}});
    auto [a, b] = closing[rng() % closing.size()];
    for (auto& c : doc["concepts"])
      if (c["name"] == a) c["deps"].push_back(b);
    ++cycles;
    try {
      ont::ontology_from_json(doc);
      f.add("document with cycle " + a + " -> " + b + " accepted");
    } catch (const ont::CycleIntroduced&) {
    } catch (const std::exception& e) {
      f.add(std::string("document cycle gave ") + e.what());
    }
  }
  return f.verdict(std::to_string(insertions) + " valid insertions kept a DAG, " + std::to_string(cycles) +
                   " cycle attempts all raised CycleIntroduced");
}

// ---------------------------------------------------------------------------

Verdict portal_ordering() {
  auto d = fixtures::shipped();
  Failures f;
  std::vector<std::string> prompts, responses;
  for (const auto& p : d->chatbot->pairs()) {
    prompts.push_back(p.prompt);
    responses.push_back(p.response);
  }
  oracle::BruteForceIndex brute(prompts);

  // 100 sequential turns.
  {
    auto p = fixtures::portal(d);
    std::mutex mu;
    std::vector<portal::BusMessage> seen;
    p->bus().add_tap([&](const portal::BusMessage& m) {
      std::lock_guard lock(mu);
      seen.push_back(m);
    });
    auto id = p->create_session().session_id;
    std::vector<std::string> sent, replies;
    for (int i = 0; i < 100; ++i) {
      sent.push_back(prompts[static_cast<std::size_t>(i) % prompts.size()]);
      replies.push_back(p->post_utterance(id, sent.back()).reply);
      // The chatbot answer comes first; the root prompt may follow it.
      const auto expected = responses[brute.best(sent.back()).first];
      if (replies.back().rfind(expected, 0) != 0) f.add("turn " + std::to_string(i + 1) + " replied \"" + replies.back() + "\"");
    }
    auto t = p->get_transcript(id);
    if (t.size() != 201) {
      f.add("transcript has " + std::to_string(t.size()) + " entries");
    } else {
      for (std::size_t i = 0; i < 100; ++i) {
        const auto& u = t[1 + 2 * i];
        const auto& r = t[2 + 2 * i];
        if (u.speaker != "user" || u.text != sent[i] || u.turn != static_cast<int>(i + 1) || r.speaker != "system" ||
            r.text != replies[i] || r.turn != u.turn)
          f.add("transcript out of order at turn " + std::to_string(i + 1));
      }
    }
    std::uint64_t last = 0;
    for (std::size_t i = 0; i + 1 < seen.size(); i += 2) {
      const auto& req = seen[i];
      const auto& res = seen[i + 1];
      if (req.seq <= last || res.seq != req.seq) f.add("bus seq out of order");
      last = req.seq;
    }
  }

  // A second request while a turn is in flight.
  {
    auto p = fixtures::portal(d);
    std::promise<void> entered, release;
    auto release_future = release.get_future().share();
    p->bus().add_tap([&, release_future](const portal::BusMessage& m) {
      if (m.topic == portal::Topic::NluRequest && m.payload.value("text", "") == "hold") {
        entered.set_value();
        release_future.wait();
      }
    });
    auto id = p->create_session().session_id;
    auto first = std::async(std::launch::async, [&] { return p->post_utterance(id, "hold"); });
    entered.get_future().wait();
    bool busy = false;
    try {
      p->post_utterance(id, "hello");
    } catch (const portal::Busy&) {
      busy = true;
    }
    release.set_value();
    if (!busy) f.add("concurrent request was not rejected with Busy");
    try {
      first.get();
    } catch (const std::exception& e) {
      f.add(std::string("in-flight turn failed: ") + e.what());
    }
    for (const auto& e : p->get_transcript(id))
      if (e.text == "hello") f.add("rejected utterance reached the transcript");
  }

  // 20 parallel sessions, each compared with the same script run alone.
  {
    const std::vector<std::string> cities = {"Pittsburgh", "Boston", "New York", "Seattle", "Chicago"};
    const std::vector<std::string> days = {"today", "tomorrow", "friday", "saturday"};
    std::vector<std::vector<std::string>> scripts;
    for (std::size_t i = 0; i < 20; ++i) {
      scripts.push_back({"what is the weather in " + cities[i % 5] + " " + days[i / 5], "yes",
                         prompts[i], "I am looking for a restaurant", "never mind", "bye"});
    }
    auto run = [](portal::Portal& p, const std::vector<std::string>& script) {
      auto id = p.create_session().session_id;
      for (const auto& u : script)
        if (p.post_utterance(id, u).ended) break;
      return id;
    };
    auto solo = fixtures::portal(d);
    std::vector<std::string> expected;
    for (const auto& s : scripts) expected.push_back(masked_transcript(*solo, run(*solo, s)));

    auto shared = fixtures::portal(d);
    std::vector<std::string> session_ids(20);
    std::latch go(20);
    std::vector<std::thread> threads;
    std::mutex mu;
    for (std::size_t i = 0; i < 20; ++i) {
      threads.emplace_back([&, i] {
        go.arrive_and_wait();
        try {
          session_ids[i] = run(*shared, scripts[i]);
        } catch (const std::exception& e) {
          std::lock_guard lock(mu);
          f.add("session " + std::to_string(i) + ": " + e.what());
        }
      });
    }
    for (auto& t : threads) t.join();
    for (std::size_t i = 0; i < 20; ++i) {
      if (session_ids[i].empty()) continue;
      if (masked_transcript(*shared, session_ids[i]) != expected[i])
        f.add("session " + std::to_string(i) + " differs from its solo run");
      for (const auto& e : shared->get_transcript(session_ids[i]))
        if (e.speaker == "user" && std::find(scripts[i].begin(), scripts[i].end(), e.text) == scripts[i].end())
          f.add("session " + std::to_string(i) + " holds a foreign utterance");
    }
  }
  return f.verdict("100 sequential replies in order, Busy on overlap, 20 parallel sessions match solo runs");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"fig5-replay", fig5_replay},
      {"table1-frame", table1_frame},
      {"nlg-example", nlg_example},
      {"protocol-conformance", protocol_conformance},
      {"chatbot-gate", chatbot_gate},
      {"engine-properties", engine_properties},
      {"ontology-fuzz", ontology_fuzz},
      {"portal-ordering", portal_ordering},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Verdict v;
    try {
      v = run();
    } catch (const std::exception& e) {
      v = {false, std::string("threw ") + e.what()};
    }
    std::cout << (v.pass ? "PASS " : "FAIL ") << name << ": " << v.detail << std::endl;
    if (!v.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
