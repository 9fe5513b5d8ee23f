#pragma once

// Seeded discrete-event simulator of a partially synchronous network.
//
// Events are ordered by (time, seq); seq follows insertion order, so a run is
// a pure function of its ScenarioConfig. Protocol and pacemaker state machines
// never see the clock: the simulator feeds them inputs and turns their
// outputs into scheduled deliveries and timers.

#include <memory>
#include <queue>
#include <random>

#include "hsl/hotstuff.hpp"
#include "hsl/hotstuff2.hpp"
#include "hsl/trace.hpp"

namespace hsl {

/// Delivery-time model. Before GST the adversary picks the delay (bounded by
/// GST+Δ); after GST every message takes δ in [δmin, δmax] plus a size term.
class Network {
 public:
  Network(DelayModel model, std::uint64_t seed) : model_(model), rng_(seed ^ 0x9e3779b97f4a7c15ull) {}

  const DelayModel& model() const { return model_; }

  /// kNever when the message would only arrive after an infinite GST.
  SimTime delivery_time(SimTime send, std::uint64_t payload_units, bool max_delay = false) {
    const SimTime cost = static_cast<SimTime>(payload_units) * model_.payload_cost;
    if (send >= model_.gst) {
      if (max_delay) return send + model_.delta_cap + cost;
      return send + draw(model_.delta_min, model_.delta_max) + cost;
    }
    const SimTime cap = saturating_add(saturating_add(model_.gst, model_.delta_cap), cost);
    if (max_delay || model_.pre_gst == PreGstPolicy::AdversarialHold) return cap;
    const SimTime choice = send + draw(model_.delta_min, std::max(model_.delta_min, model_.pre_gst_max)) + cost;
    return std::min(choice, cap);
  }

 private:
  SimTime draw(SimTime lo, SimTime hi) {
    if (hi <= lo) return lo;
    return lo + static_cast<SimTime>(rng_() % static_cast<std::uint64_t>(hi - lo + 1));
  }

  DelayModel model_;
  std::mt19937_64 rng_;
};

struct SimEvent {
  enum class Kind : std::uint8_t { Deliver, TimerFire, Inject };

  SimTime time = 0;
  std::uint64_t seq = 0;
  Kind kind = Kind::Deliver;
  NodeId node = 0;  // recipient / timer owner
  NodeId from = 0;
  std::shared_ptr<const Payload> msg;
  TimerRequest timer;
};

class EventQueue {
 public:
  void push(SimEvent e) {
    e.seq = next_seq_++;
    heap_.push(std::move(e));
  }
  bool empty() const { return heap_.empty(); }
  const SimEvent& top() const { return heap_.top(); }
  SimEvent pop() {
    SimEvent e = heap_.top();
    heap_.pop();
    return e;
  }
  std::size_t size() const { return heap_.size(); }

 private:
  struct Later {
    bool operator()(const SimEvent& a, const SimEvent& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };
  std::priority_queue<SimEvent, std::vector<SimEvent>, Later> heap_;
  std::uint64_t next_seq_ = 0;
};

/// Every signature token carried by a message.
inline std::vector<SignatureToken> carried_tokens(const Payload& p) {
  std::vector<SignatureToken> out;
  auto add_qc = [&](const QuorumCertificate& qc) { out.insert(out.end(), qc.tokens.begin(), qc.tokens.end()); };
  if (auto* m = std::get_if<ProposalMsg>(&p)) add_qc(m->block.justify);
  else if (auto* m = std::get_if<VoteMsg>(&p)) out.push_back(m->vote.sig);
  else if (auto* m = std::get_if<QcMsg>(&p)) add_qc(m->qc);
  else if (auto* m = std::get_if<NewViewMsg>(&p)) {
    add_qc(m->highest_qc);
    if (m->last_vote) out.push_back(m->last_vote->sig);
  } else if (auto* m = std::get_if<StatusMsg>(&p)) add_qc(m->lock);
  else if (auto* m = std::get_if<FetchReplyMsg>(&p)) add_qc(m->block.justify);
  else if (auto* m = std::get_if<SyncMsg>(&p)) add_qc(m->highest_qc);
  return out;
}

template <class Node>
class Simulation {
 public:
  explicit Simulation(ScenarioConfig cfg) : cfg_(std::move(cfg)), net_(cfg_.delay, cfg_.seed) {
    cfg_.validate();
    const LeaderSchedule leaders{cfg_.n, cfg_.leader_mode, cfg_.seed};
    PacemakerConfig pc;
    pc.kind = cfg_.pacemaker;
    pc.n = cfg_.n;
    pc.base_timeout = cfg_.effective_base_timeout();
    pc.relay_timeout = cfg_.effective_relay_timeout();
    strategy_.resize(cfg_.n);
    for (const auto& [id, s] : cfg_.byzantine) strategy_[id] = s;
    for (NodeId i = 0; i < cfg_.n; ++i) {
      NodeParams p;
      p.id = i;
      p.n = cfg_.n;
      p.leaders = leaders;
      p.payload_units = cfg_.payload_units;
      p.aggregate = cfg_.aggregate;
      p.delta = cfg_.delay.delta_cap;
      p.mutation = cfg_.mutation;
      nodes_.emplace_back(p);
      pms_.emplace_back(pc, i, leaders);
    }
    for (const auto& t : genesis_qc(cfg_.n).tokens) registry_.insert(t);
    trace_.config = cfg_;
    trace_.counters.resize(cfg_.n);
    commit_counts_.assign(cfg_.n, 0);
    for (NodeId i = 0; i < cfg_.n; ++i) {
      SimEvent e;
      e.kind = SimEvent::Kind::Inject;
      e.node = i;
      queue_.push(std::move(e));
    }
  }

  /// Runs to the stop condition and returns the complete trace.
  Trace run() {
    while (!stopped()) {
      if (queue_.empty()) break;
      if (queue_.top().time > cfg_.stop.horizon) {
        now_ = cfg_.stop.horizon;
        break;
      }
      step();
    }
    return finish();
  }

  /// Processes the earliest pending event.
  void step() {
    SimEvent e = queue_.pop();
    if (e.time < now_) throw ConsensusError(ErrorKind::ClockRegression, std::to_string(e.time) + " < " + std::to_string(now_));
    now_ = e.time;
    switch (e.kind) {
      case SimEvent::Kind::Inject: apply_decision(e.node, pms_[e.node].start()); break;
      case SimEvent::Kind::Deliver: deliver(e.from, e.node, e.msg); break;
      case SimEvent::Kind::TimerFire: fire(e.node, e.timer); break;
    }
  }

  bool stopped() const {
    if (halted_) return true;
    return cfg_.stop.commits && nodes_done_ == correct_count();
  }

  Trace finish() {
    trace_.end_time = now_;
    trace_.halted = halted_;
    trace_.halt_reason = halt_reason_;
    for (NodeId i = 0; i < cfg_.n; ++i)
      if (!cfg_.is_byzantine(i)) trace_.max_timeout = std::max(trace_.max_timeout, pms_[i].max_timeout_armed());
    return trace_;
  }

  /// Sends `m` as node `from` now, through its strategy and the token audit.
  void inject(NodeId from, Outgoing m) {
    std::vector<Outgoing> one;
    one.push_back(std::move(m));
    send_all(from, std::move(one));
  }

  const Node& node(NodeId i) const { return nodes_.at(i); }
  const Pacemaker& pacemaker(NodeId i) const { return pms_.at(i); }
  SimTime now() const { return now_; }
  const Trace& trace() const { return trace_; }
  EventQueue& queue() { return queue_; }

 private:
  std::size_t correct_count() const { return cfg_.n - cfg_.byzantine.size(); }
  bool correct(NodeId i) const { return !strategy_[i].has_value(); }
  bool crashed(NodeId i) const {
    const auto& s = strategy_[i];
    return s && s->kind == StrategyKind::Crash && now_ >= s->at_time;
  }
  bool has_strategy(NodeId i, StrategyKind k) const { return strategy_[i] && strategy_[i]->kind == k; }

  TraceRecord& record(NodeId node, RecordKind kind, std::string label, ViewNumber view = 0) {
    TraceRecord r;
    r.seq = trace_.records.size();
    r.time = now_;
    r.node = node;
    r.kind = kind;
    r.label = std::move(label);
    r.view = view;
    trace_.records.push_back(std::move(r));
    return trace_.records.back();
  }

  /// Runs a state-machine handler; rejected inputs become trace notes.
  template <class F>
  std::optional<ProtocolOutput> guarded(NodeId node, ViewNumber view, F&& f) {
    try {
      return f();
    } catch (const ConsensusError& e) {
      if (e.kind() == ErrorKind::ForgedToken || e.kind() == ErrorKind::ClockRegression) throw;
      record(node, RecordKind::Note, to_string(NoteKind::Reject), view).text = e.what();
      return std::nullopt;
    }
  }

  void deliver(NodeId from, NodeId to, const std::shared_ptr<const Payload>& msg) {
    const Payload& p = *msg;
    if (crashed(to)) {
      auto& r = record(to, RecordKind::Drop, kind_name(p), view_of(p));
      r.peer = from;
      return;
    }
    {
      auto& r = record(to, RecordKind::Deliver, kind_name(p), view_of(p));
      r.peer = from;
      r.size = size_units(p);
    }
    Node& node = nodes_[to];
    Pacemaker& pm = pms_[to];
    if (auto* m = std::get_if<SyncMsg>(&p)) {
      if (auto out = guarded(to, m->view, [&] { return node.observe_qc(m->highest_qc, from); })) apply_output(to, std::move(*out));
      apply_decision(to, pm.on_event(pm::SyncReceived{from, m->view}, node.key()));
    } else if (auto* m = std::get_if<WishMsg>(&p)) {
      apply_decision(to, pm.on_event(pm::WishReceived{from, m->view}, node.key()));
    } else if (auto* m = std::get_if<ViewCertMsg>(&p)) {
      apply_decision(to, pm.on_event(pm::CertReceived{m->view}, node.key()));
    } else {
      if (auto out = guarded(to, view_of(p), [&] { return node.on_message(from, p); })) apply_output(to, std::move(*out));
      if (auto* q = std::get_if<QcMsg>(&p)) collude_commit(to, q->qc);
    }
  }

  void fire(NodeId id, const TimerRequest& t) {
    if (crashed(id)) {
      record(id, RecordKind::TimerStale, to_string(t.kind), t.view).text = "crashed";
      return;
    }
    Pacemaker& pm = pms_[id];
    Node& node = nodes_[id];
    switch (t.kind) {
      case TimerKind::ViewTimeout:
        if (pm.view() != t.view) {
          record(id, RecordKind::TimerStale, to_string(t.kind), t.view);
          return;
        }
        record(id, RecordKind::Timeout, to_string(t.kind), t.view);
        apply_decision(id, pm.on_event(pm::LocalTimeout{t.view}, node.key()));
        return;
      case TimerKind::RelayTimeout:
        if (pm.view() >= t.view) {
          record(id, RecordKind::TimerStale, to_string(t.kind), t.view);
          return;
        }
        record(id, RecordKind::Timer, to_string(t.kind), t.view).text = "stage=" + std::to_string(t.stage);
        apply_decision(id, pm.on_event(pm::RelayTimeout{t.view, t.stage}, node.key()));
        return;
      case TimerKind::DeltaWait:
        if (node.current_view() != t.view) {
          record(id, RecordKind::TimerStale, to_string(t.kind), t.view);
          return;
        }
        record(id, RecordKind::Timer, to_string(t.kind), t.view);
        if (auto out = guarded(id, t.view, [&] { return node.on_timer(t); })) apply_output(id, std::move(*out));
        return;
    }
  }

  void schedule_timer(NodeId id, const TimerRequest& t) {
    SimEvent e;
    e.time = saturating_add(now_, t.delay);
    e.kind = SimEvent::Kind::TimerFire;
    e.node = id;
    e.timer = t;
    queue_.push(std::move(e));
  }

  void apply_output(NodeId id, ProtocolOutput&& out) {
    for (const Note& n : out.notes) {
      auto& r = record(id, RecordKind::Note, to_string(n.kind), n.view);
      r.block = n.block;
      r.text = n.detail;
      if (correct(id) && n.kind == NoteKind::EquivocationEvidence && !halted_) {
        halted_ = true;
        halt_reason_ = "equivocation evidence at node " + std::to_string(id) + ": " + n.detail;
      }
    }
    if (out.halt && correct(id) && !halted_) {
      halted_ = true;
      halt_reason_ = "halt requested by node " + std::to_string(id);
    }
    for (BlockId b : out.committed) {
      trace_.commits.push_back(CommitRecord{now_, id, b, nodes_[id].store().height(b)});
      if (correct(id) && cfg_.stop.commits && ++commit_counts_[id] == *cfg_.stop.commits) ++nodes_done_;
    }
    send_all(id, std::move(out.messages));
    for (const auto& t : out.timers) schedule_timer(id, t);
    if (out.qc_observed) apply_decision(id, pms_[id].on_event(pm::QcObserved{*out.qc_observed}, nodes_[id].key()));
  }

  void apply_decision(NodeId id, PacemakerDecision d) {
    send_all(id, std::move(d.messages));
    for (const auto& t : d.timers) schedule_timer(id, t);
    if (d.enter_view) {
      const ViewNumber v = *d.enter_view;
      record(id, RecordKind::EnterView, d.via_qc ? "qc" : "sync", v);
      if (auto out = guarded(id, v, [&] { return nodes_[id].enter_view(v, d.via_qc); })) apply_output(id, std::move(*out));
    }
  }

  // --- outgoing traffic and Byzantine deviation -----------------------------

  void send_all(NodeId from, std::vector<Outgoing> msgs) {
    if (crashed(from)) return;
    for (auto& m : msgs) {
      if (const auto& s = strategy_[from]) {
        if (s->kind == StrategyKind::SilentLeader) {
          if (auto* pr = std::get_if<ProposalMsg>(&m.body);
              pr && pr->block.proposer == from && (!s->only_view || *s->only_view == pr->block.view))
            continue;
        } else if (s->kind == StrategyKind::VoteWithholder) {
          if (std::holds_alternative<VoteMsg>(m.body)) continue;
          if (auto* nv = std::get_if<NewViewMsg>(&m.body)) nv->last_vote.reset();
        } else if (s->kind == StrategyKind::Equivocator) {
          if (auto* pr = std::get_if<ProposalMsg>(&m.body); pr && pr->block.proposer == from && !m.to) {
            equivocate(from, pr->block);
            continue;
          }
        }
      }
      auto payload = std::make_shared<const Payload>(std::move(m.body));
      audit_tokens(from, *payload);
      if (m.to) {
        transmit(from, *m.to, payload);
      } else {
        for (NodeId j = 0; j < cfg_.n; ++j)
          if (j != from) transmit(from, j, payload);
      }
      if (auto* q = std::get_if<QcMsg>(payload.get())) collude_commit(from, q->qc);
    }
  }

  void transmit(NodeId from, NodeId to, const std::shared_ptr<const Payload>& p) {
    const std::uint64_t size = size_units(*p);
    const bool pacemaker = is_pacemaker(*p);
    auto& c = trace_.counters[from];
    ++c.sends;
    c.send_units += size;
    if (pacemaker) {
      ++c.pacemaker_sends;
      c.pacemaker_units += size;
    }
    auto& r = record(from, RecordKind::Send, kind_name(*p), view_of(*p));
    r.peer = to;
    r.size = size;
    r.pacemaker = pacemaker;
    if (auto* pr = std::get_if<ProposalMsg>(p.get())) r.block = pr->block.id;
    const SimTime at = net_.delivery_time(now_, payload_units_of(*p), has_strategy(from, StrategyKind::MaxDelay));
    if (at == kNever) return;
    SimEvent e;
    e.time = at;
    e.kind = SimEvent::Kind::Deliver;
    e.node = to;
    e.from = from;
    e.msg = p;
    queue_.push(std::move(e));
  }

  /// Correct senders register their tokens; corrupted senders may only carry
  /// correct-node tokens that were registered earlier.
  void audit_tokens(NodeId from, const Payload& p) {
    for (const SignatureToken& t : carried_tokens(p)) {
      if (correct(from)) {
        registry_.insert(t);
      } else if (t.signer < cfg_.n && correct(t.signer) && !registry_.count(t)) {
        throw ConsensusError(ErrorKind::ForgedToken,
                             "node " + std::to_string(from) + " carries an unissued token of node " + std::to_string(t.signer));
      }
    }
  }

  std::vector<NodeId> colluders() const {
    std::vector<NodeId> out;
    for (NodeId i = 0; i < cfg_.n; ++i)
      if (has_strategy(i, StrategyKind::Equivocator) && !crashed(i)) out.push_back(i);
    return out;
  }

  /// Two blocks for one led view. The second alternates between a sibling of
  /// the honest proposal and a fork below the leader's committed tip.
  Block conflicting_block(NodeId from, const Block& a) const {
    const BlockStore& store = nodes_[from].store();
    const BlockId tip = store.committed_tip();
    if (a.view % 2 == 1 && tip != kGenesisId) {
      const Block& c = store.get(tip);
      return make_block(c.parent, a.view, c.justify, a.payload_units + 1, from);
    }
    return make_block(a.parent, a.view, a.justify, a.payload_units + 1, from);
  }

  void equivocate(NodeId from, const Block& a) {
    const Block b = conflicting_block(from, a);
    auto pa = std::make_shared<const Payload>(ProposalMsg{a});
    auto pb = std::make_shared<const Payload>(ProposalMsg{b});
    audit_tokens(from, *pa);
    audit_tokens(from, *pb);
    const std::size_t n = cfg_.n;
    for (NodeId j = 0; j < n; ++j) {
      if (j == from) continue;
      if (j < (n + 1) / 2) transmit(from, j, pa);
      if (j >= n / 2) transmit(from, j, pb);
    }
    const auto group = colluders();
    for (NodeId c : group) {
      nodes_[c].adopt_block(a);
      nodes_[c].adopt_block(b);
    }
    for (NodeId c : group) {
      for (const Block* x : {&a, &b}) {
        if (!nodes_[c].store().contains(x->id)) continue;
        const Vote v = make_vote(x->id, x->view, Node::proposal_phase, c);
        const NodeId target = Node::votes_to_next_leader ? nodes_[c].leader_of(x->view + 1) : x->proposer;
        cast_vote(c, target, v);
      }
    }
  }

  /// Colluding equivocators ratify every prepare certificate they see.
  void collude_commit(NodeId c, const QuorumCertificate& qc) {
    if (qc.phase != Phase::Prepare || !has_strategy(c, StrategyKind::Equivocator) || crashed(c)) return;
    if (!colluded_commit_.insert({c, qc.block_id}).second) return;
    cast_vote(c, nodes_[c].leader_of(qc.view), make_vote(qc.block_id, qc.view, Phase::Commit, c));
  }

  void cast_vote(NodeId c, NodeId target, const Vote& v) {
    if (target == c) {
      if (auto out = guarded(c, v.view, [&] { return nodes_[c].on_vote(v); })) apply_output(c, std::move(*out));
    } else {
      std::vector<Outgoing> one;
      one.push_back(Outgoing{target, VoteMsg{v}});
      send_all(c, std::move(one));
    }
  }

  ScenarioConfig cfg_;
  Network net_;
  EventQueue queue_;
  SimTime now_ = 0;
  Trace trace_;
  std::vector<Node> nodes_;
  std::vector<Pacemaker> pms_;
  std::vector<std::optional<ByzantineStrategy>> strategy_;
  std::set<SignatureToken> registry_;
  std::set<std::pair<NodeId, BlockId>> colluded_commit_;
  std::vector<std::uint64_t> commit_counts_;
  std::size_t nodes_done_ = 0;
  bool halted_ = false;
  std::string halt_reason_;
};

/// Runs a scenario with the protocol it names.
inline Trace simulate(const ScenarioConfig& cfg) {
  if (cfg.protocol == ProtocolKind::HotStuff3) return Simulation<HotStuffNode>(cfg).run();
  return Simulation<HotStuff2Node>(cfg).run();
}

}  // namespace hsl
