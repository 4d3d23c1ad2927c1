#include "mfgmesh/mfest.hpp"

#include <algorithm>
#include <stdexcept>

namespace mfgmesh {

CountVector CountVector::general(std::size_t n_states, std::size_t n_agents) {
  CountVector v(EstimationMode::General, n_states);
  v.slot_of_id_.assign(n_agents, kNoCount);
  v.slot_count_.assign(n_states, 0);
  return v;
}

CountVector CountVector::visibility(std::size_t n_states) {
  CountVector v(EstimationMode::Visibility, n_states);
  v.slot_count_.assign(n_states, kNoCount);
  return v;
}

bool CountVector::has_count(std::size_t s) const {
  const auto c = slot_count_.at(s);
  return mode_ == EstimationMode::General ? c > 0 : c != kNoCount;
}

std::size_t CountVector::slot_size(std::size_t s) const {
  return has_count(s) ? static_cast<std::size_t>(slot_count_[s]) : 0;
}

std::size_t CountVector::counted() const {
  std::size_t total = 0;
  for (std::size_t s = 0; s < n_states_; ++s) total += slot_size(s);
  return total;
}

std::size_t CountVector::unseen_states() const {
  std::size_t total = 0;
  for (std::size_t s = 0; s < n_states_; ++s) total += has_count(s) ? 0 : 1;
  return total;
}

void CountVector::add_id(std::size_t s, std::size_t id) {
  if (mode_ != EstimationMode::General) throw std::logic_error("add_id on a visibility count");
  if (s >= n_states_) throw std::out_of_range("state index out of range");
  auto& slot = slot_of_id_.at(id);
  const auto target = static_cast<std::int64_t>(s);
  if (slot == target) return;
  if (slot != kNoCount) throw std::logic_error("agent ID counted in two states");
  slot = target;
  ++slot_count_[s];
}

std::vector<std::size_t> CountVector::ids(std::size_t s) const {
  std::vector<std::size_t> out;
  for (std::size_t id = 0; id < slot_of_id_.size(); ++id)
    if (slot_of_id_[id] == static_cast<std::int64_t>(s)) out.push_back(id);
  return out;
}

void CountVector::set_count(std::size_t s, std::size_t count) {
  if (mode_ != EstimationMode::Visibility)
    throw std::logic_error("set_count on a general count");
  slot_count_.at(s) = static_cast<std::int64_t>(count);
}

void CountVector::merge_from(const CountVector& other) {
  if (other.mode_ != mode_ || other.n_states_ != n_states_ ||
      other.slot_of_id_.size() != slot_of_id_.size())
    throw std::invalid_argument("count vectors have inconsistent shapes or modes");

  if (mode_ == EstimationMode::General) {
    for (std::size_t id = 0; id < slot_of_id_.size(); ++id) {
      const auto theirs = other.slot_of_id_[id];
      if (theirs != kNoCount) add_id(static_cast<std::size_t>(theirs), id);
    }
    return;
  }
  for (std::size_t s = 0; s < n_states_; ++s) {
    const auto theirs = other.slot_count_[s];
    if (theirs == kNoCount) continue;
    auto& mine = slot_count_[s];
    if (mine == kNoCount) {
      mine = theirs;
    } else if (mine != theirs) {
      throw std::logic_error("conflicting counts for one state during gossip");
    }
  }
}

CountVector local_count_general(std::size_t i, std::span<const std::size_t> states,
                                std::span<const std::size_t> ids, const AgentGraph& obs_graph,
                                std::size_t n_states) {
  const std::size_t n = states.size();
  if (ids.size() != n || obs_graph.size() != n)
    throw std::invalid_argument("states, ids and observation graph disagree on N");
  std::vector<std::size_t> sorted(ids.begin(), ids.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw std::invalid_argument("duplicate agent IDs");
  if (!sorted.empty() && sorted.back() >= n) throw std::invalid_argument("agent ID >= N");

  auto v = CountVector::general(n_states, n);
  v.add_id(states[i], ids[i]);
  for (std::size_t j : obs_graph.neighbors(i)) v.add_id(states[j], ids[j]);
  return v;
}

CountVector local_count_visibility(std::size_t i, std::span<const std::size_t> states,
                                   const StateVisGraph& vis) {
  std::vector<std::size_t> occupancy(vis.num_states(), 0);
  for (std::size_t s : states) ++occupancy.at(s);
  auto v = CountVector::visibility(vis.num_states());
  for (std::size_t s : vis.visible_from(states[i])) v.set_count(s, occupancy[s]);
  return v;
}

std::vector<CountVector> gossip_round(std::span<const CountVector> counts,
                                      const AgentGraph& comm) {
  if (comm.size() != counts.size())
    throw std::invalid_argument("communication graph size does not match count vectors");
  std::vector<CountVector> next(counts.begin(), counts.end());
  for (std::size_t i = 0; i < counts.size(); ++i)
    for (std::size_t j : comm.neighbors(i)) next[i].merge_from(counts[j]);
  return next;
}

MeanFieldEstimate finalize_estimate_general(const CountVector& count, std::size_t n_agents) {
  if (count.mode() != EstimationMode::General)
    throw std::invalid_argument("expected a general-mode count vector");
  const std::size_t counted = count.counted();
  if (counted > n_agents) throw std::logic_error("more agents counted than exist");
  const double n = static_cast<double>(n_agents);
  const double spread = static_cast<double>(n_agents - counted) /
                        (n * static_cast<double>(count.num_states()));
  MeanFieldEstimate est;
  est.probs.assign(count.num_states(), spread);
  for (std::size_t s = 0; s < count.num_states(); ++s)
    if (count.has_count(s)) est.probs[s] += static_cast<double>(count.slot_size(s)) / n;
  return est;
}

MeanFieldEstimate finalize_estimate_visibility(const CountVector& count, std::size_t n_agents) {
  if (count.mode() != EstimationMode::Visibility)
    throw std::invalid_argument("expected a visibility-mode count vector");
  const std::size_t counted = count.counted();
  if (counted > n_agents) throw std::logic_error("more agents counted than exist");
  const std::size_t uncounted = n_agents - counted;
  const std::size_t unseen = count.unseen_states();
  if (unseen == 0 && uncounted != 0)
    throw std::logic_error("uncounted agents but every state has been seen");

  const double n = static_cast<double>(n_agents);
  const double spread =
      unseen == 0 ? 0.0 : static_cast<double>(uncounted) / (n * static_cast<double>(unseen));
  MeanFieldEstimate est;
  est.probs.resize(count.num_states());
  for (std::size_t s = 0; s < count.num_states(); ++s)
    est.probs[s] = count.has_count(s) ? static_cast<double>(count.slot_size(s)) / n : spread;
  return est;
}

std::vector<MeanFieldEstimate> estimate_all(std::span<const std::size_t> states,
                                            std::span<const std::size_t> ids,
                                            const AgentGraph& comm, const AgentGraph& obs,
                                            std::size_t rounds, std::size_t n_states) {
  const std::size_t n = states.size();
  std::vector<CountVector> counts;
  counts.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    counts.push_back(local_count_general(i, states, ids, obs, n_states));
  for (std::size_t r = 0; r < rounds; ++r) counts = gossip_round(counts, comm);
  std::vector<MeanFieldEstimate> out;
  out.reserve(n);
  for (const auto& c : counts) out.push_back(finalize_estimate_general(c, n));
  return out;
}

std::vector<MeanFieldEstimate> estimate_all(std::span<const std::size_t> states,
                                            const AgentGraph& comm, const StateVisGraph& vis,
                                            std::size_t rounds) {
  const std::size_t n = states.size();
  std::vector<CountVector> counts;
  counts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) counts.push_back(local_count_visibility(i, states, vis));
  for (std::size_t r = 0; r < rounds; ++r) counts = gossip_round(counts, comm);
  std::vector<MeanFieldEstimate> out;
  out.reserve(n);
  for (const auto& c : counts) out.push_back(finalize_estimate_visibility(c, n));
  return out;
}

}  // namespace mfgmesh
