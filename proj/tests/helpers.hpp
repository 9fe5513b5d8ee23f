#pragma once

#include <vector>

#include "hsl/harness.hpp"

namespace hsl::testing {

inline QuorumCertificate qc_for(const Block& b, Phase phase = Phase::Generic, std::vector<NodeId> voters = {0, 1, 2},
                                std::size_t n = 4) {
  std::vector<Vote> votes;
  for (NodeId v : voters) votes.push_back(make_vote(b.id, b.view, phase, v));
  return form_qc(votes, n);
}

/// Block at `view` on top of `parent`, justified by a certificate on the parent.
inline Block child_of(const Block& parent, ViewNumber view, Phase phase = Phase::Generic, std::size_t n = 4,
                      LeaderSchedule leaders = {}) {
  leaders.n = n;
  const QuorumCertificate j = parent.id == kGenesisId ? genesis_qc(n) : qc_for(parent, phase, {0, 1, 2}, n);
  return make_block(parent.id, view, j, 0, leaders(view));
}

inline NodeParams params(NodeId id, std::size_t n = 4, Mutation m = Mutation::None) {
  NodeParams p;
  p.id = id;
  p.n = n;
  p.leaders = LeaderSchedule{n, LeaderMode::RoundRobin, 0};
  p.mutation = m;
  return p;
}

inline std::size_t count_sent(const ProtocolOutput& out, std::size_t index) {
  std::size_t c = 0;
  for (const auto& m : out.messages)
    if (m.body.index() == index) ++c;
  return c;
}

template <class T>
inline std::vector<const T*> sent(const ProtocolOutput& out) {
  std::vector<const T*> v;
  for (const auto& m : out.messages)
    if (auto* x = std::get_if<T>(&m.body)) v.push_back(x);
  return v;
}

inline bool has_note(const ProtocolOutput& out, NoteKind k) {
  for (const auto& n : out.notes)
    if (n.kind == k) return true;
  return false;
}

inline std::size_t count_records(const Trace& t, RecordKind kind, const std::string& label = {}) {
  std::size_t c = 0;
  for (const auto& r : t.records)
    if (r.kind == kind && (label.empty() || r.label == label)) ++c;
  return c;
}

}  // namespace hsl::testing
