#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mfgmesh/env.hpp"
#include "mfgmesh/graphs.hpp"

namespace mfgmesh {

enum class EstimationMode { General, Visibility };

using MeanFieldEstimate = EmpiricalDistribution;

/// Per-state partial tally held by one agent during estimation.
///
/// General mode records which agent IDs have been placed in which state. An
/// agent occupies exactly one state, so the representation maps each ID to at
/// most one slot; a slot with no IDs is the "no count" marker.
///
/// Visibility mode holds an exact integer occupancy per seen slot, or the
/// "no count" marker. A seen slot may hold zero.
class CountVector {
 public:
  static constexpr std::int64_t kNoCount = -1;

  static CountVector general(std::size_t n_states, std::size_t n_agents);
  static CountVector visibility(std::size_t n_states);

  EstimationMode mode() const { return mode_; }
  std::size_t num_states() const { return n_states_; }

  bool has_count(std::size_t s) const;
  // |IDs| in general mode, the integer count in visibility mode; 0 for no count.
  std::size_t slot_size(std::size_t s) const;
  std::size_t counted() const;
  std::size_t unseen_states() const;

  // General mode.
  void add_id(std::size_t s, std::size_t id);
  std::vector<std::size_t> ids(std::size_t s) const;

  // Visibility mode.
  void set_count(std::size_t s, std::size_t count);

  /// Merges `other` into this vector: ID union (general) or filling of
  /// no-count slots (visibility). Throws std::logic_error on contradictory
  /// information, which correct counting never produces.
  void merge_from(const CountVector& other);

  friend bool operator==(const CountVector&, const CountVector&) = default;

 private:
  CountVector(EstimationMode mode, std::size_t n_states) : mode_(mode), n_states_(n_states) {}

  EstimationMode mode_;
  std::size_t n_states_;
  std::vector<std::int64_t> slot_of_id_;  // general: state per ID or kNoCount
  std::vector<std::int64_t> slot_count_;  // general: IDs per slot; visibility: count or kNoCount
};

CountVector local_count_general(std::size_t i, std::span<const std::size_t> states,
                                std::span<const std::size_t> ids, const AgentGraph& obs_graph,
                                std::size_t n_states);

CountVector local_count_visibility(std::size_t i, std::span<const std::size_t> states,
                                   const StateVisGraph& vis);

/// One synchronous exchange: every output vector is computed from the input
/// vectors only.
std::vector<CountVector> gossip_round(std::span<const CountVector> counts,
                                      const AgentGraph& comm);

MeanFieldEstimate finalize_estimate_general(const CountVector& count, std::size_t n_agents);
MeanFieldEstimate finalize_estimate_visibility(const CountVector& count, std::size_t n_agents);

std::vector<MeanFieldEstimate> estimate_all(std::span<const std::size_t> states,
                                            std::span<const std::size_t> ids,
                                            const AgentGraph& comm, const AgentGraph& obs,
                                            std::size_t rounds, std::size_t n_states);

std::vector<MeanFieldEstimate> estimate_all(std::span<const std::size_t> states,
                                            const AgentGraph& comm, const StateVisGraph& vis,
                                            std::size_t rounds);

}  // namespace mfgmesh
