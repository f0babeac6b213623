#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "dsse/common.hpp"

namespace dsse {

enum class Phase : std::uint8_t { A = 0, B = 1, C = 2 };

inline char phase_letter(Phase ph) { return "abc"[static_cast<int>(ph)]; }

Phase phase_from_letter(char c);

// Small set of phases, ordered a < b < c.
class PhaseSet {
 public:
  PhaseSet() = default;
  static PhaseSet abc() { return PhaseSet(0b111); }
  static PhaseSet single(Phase ph) { return PhaseSet(1u << static_cast<int>(ph)); }
  static PhaseSet parse(const std::string& letters);

  bool has(Phase ph) const { return bits_ & (1u << static_cast<int>(ph)); }
  bool subset_of(PhaseSet other) const { return (bits_ & ~other.bits_) == 0; }
  int count() const;
  bool empty() const { return bits_ == 0; }
  void add(Phase ph) { bits_ |= 1u << static_cast<int>(ph); }
  std::vector<Phase> list() const;
  std::string str() const;
  bool operator==(const PhaseSet&) const = default;

 private:
  explicit PhaseSet(std::uint8_t bits) : bits_(bits) {}
  std::uint8_t bits_ = 0;
};

enum class NodeKind { Slack, Load, ZeroInjection };

std::string node_kind_name(NodeKind kind);
NodeKind node_kind_from_name(const std::string& name);

// Feasible injection box for one (node, phase), per-unit.
struct PqBox {
  double p_min = -1.0;
  double p_max = 1.0;
  double q_min = -1.0;
  double q_max = 1.0;
};

struct NodeRecord {
  int id = 0;
  PhaseSet phases;
  NodeKind kind = NodeKind::Load;
  // One box per phase in ascending phase order; zero-injection nodes are
  // pinned to the {(0,0)} singleton regardless of stored values.
  std::vector<PqBox> boxes;

  const PqBox& box(Phase ph) const;
};

struct LineRecord {
  int from = 0;  // upstream endpoint (closer to the slack)
  int to = 0;    // downstream endpoint; the line carries the phases of `to`
  // Per-unit series impedance over the phases of `to`, indexed in ascending
  // phase order, symmetric.
  Eigen::MatrixXcd z;

  std::complex<double> z_entry(const PhaseSet& phases, Phase row, Phase col) const;
};

// Maps (node, phase) pairs to dense state-vector positions.  Entries are
// ordered by ascending node id, then phase a < b < c; the slack is excluded.
class StateIndex {
 public:
  struct Entry {
    int node = 0;
    Phase phase = Phase::A;
  };

  StateIndex() = default;
  explicit StateIndex(std::vector<Entry> entries);

  int size() const { return static_cast<int>(entries_.size()); }
  const Entry& entry(int k) const { return entries_[static_cast<size_t>(k)]; }
  const std::vector<Entry>& entries() const { return entries_; }
  int index_of(int node, Phase ph) const;
  std::optional<int> find(int node, Phase ph) const;

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::int64_t, int> lookup_;
};

// Active/reactive injections laid out per StateIndex entry, per-unit.
// Consumption is negative.
struct Injections {
  Eigen::VectorXd p;
  Eigen::VectorXd q;

  static Injections zero(int n) {
    return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  }
};

// Radial multi-phase feeder: a tree of buses rooted at the slack.  Impedances
// and boxes are per-unit; the model is immutable after construction and safe
// to share across threads.
class FeederModel {
 public:
  struct Params {
    int slack_id = 0;
    double base_voltage = 2401.77;  // line-to-ground volts
    double base_power = 1e6;        // VA, three-phase system base
    double slack_voltage = 1.0;     // per-unit magnitude, all phases
  };

  FeederModel() = default;
  // Validates topology and phase consistency; throws ValidationError with the
  // offending identifiers on cycles, orphans, duplicates or phase violations.
  static FeederModel from_records(std::vector<NodeRecord> nodes,
                                  std::vector<LineRecord> lines, Params params);

  int node_count() const { return static_cast<int>(nodes_.size()); }
  int state_node_count() const { return node_count() - 1; }
  const std::vector<NodeRecord>& nodes() const { return nodes_; }
  const std::vector<LineRecord>& lines() const { return lines_; }
  const NodeRecord& node(int id) const { return nodes_[index_of(id)]; }
  bool has_node(int id) const { return id_to_index_.count(id) != 0; }

  int slack_id() const { return params_.slack_id; }
  double slack_voltage() const { return params_.slack_voltage; }
  double base_voltage() const { return params_.base_voltage; }
  double base_power() const { return params_.base_power; }

  bool is_single_phase() const { return single_phase_; }

  // Topology queries; node arguments are ids, line values are indices into
  // lines().
  int parent(int id) const;
  int parent_line(int id) const;  // -1 for the slack
  const std::vector<int>& children(int id) const { return children_[index_of(id)]; }
  int depth(int id) const { return depth_[index_of(id)]; }
  // Line indices along the path slack -> id, in path order.
  const std::vector<int>& path_lines(int id) const { return path_[index_of(id)]; }
  std::vector<int> subtree_nodes(int root_id) const;  // ids, ascending

  const StateIndex& state_index() const { return index_; }
  int index_of(int id) const;  // dense node index, slack included

  // Nodes ordered by depth, shallow to deep (slack first).
  const std::vector<int>& nodes_by_depth() const { return by_depth_; }

 private:
  void build_topology();

  Params params_;
  std::vector<NodeRecord> nodes_;  // sorted by id, slack included
  std::vector<LineRecord> lines_;
  std::unordered_map<int, int> id_to_index_;
  std::vector<int> parent_line_;
  std::vector<std::vector<int>> children_;
  std::vector<int> depth_;
  std::vector<std::vector<int>> path_;
  std::vector<int> by_depth_;
  StateIndex index_;
  bool single_phase_ = false;
};

// Lines shared by the slack->i and slack->j paths, i.e. the slack->lca(i,j)
// prefix, in path order.  common_path(i, i) is the full path to i.
std::vector<int> common_path(const FeederModel& model, int i, int j);

// Random radial feeder generation.  Deterministic for a fixed spec.
struct FeederSpec {
  int size = 36;            // nodes excluding the slack
  int max_children = 3;
  double load_fraction = 0.6;   // fraction of non-slack nodes carrying load
  double total_load_p = 0.3;    // aggregate peak active consumption, pu
  double power_factor = 0.95;
  double load_spread = 0.5;     // per-load peak drawn from [spread, 1] * mean
  double r_min = 0.001;         // per-line self resistance range, pu
  double r_max = 0.006;
  double x_min = 0.001;         // per-line self reactance range, pu
  double x_max = 0.005;
  bool three_phase = false;     // false: every node is phase-a only
  double full_phase_fraction = 0.7;  // three-phase mode: share of abc nodes
  double mutual_scale = 0.3;    // off-diagonal impedance relative to self
  std::uint64_t seed = 0;
};

FeederModel generate_feeder(const FeederSpec& spec);

// Peak injections implied by generated boxes: p = p_min / 2 (consumption is
// negative), q = -q_max / 2, scaled by `utilization`.
Injections nominal_injections(const FeederModel& model, double utilization = 1.0);

// Subtree decomposition for multi-area estimation.
struct Area {
  int id = 0;        // position in the partition, 0-based
  int root = 0;      // root node id
  std::vector<int> nodes;  // ids, ascending, root included
};

struct AreaPartition {
  std::vector<Area> areas;
  std::vector<int> unclustered;  // ids, ascending, slack included

  bool contains_nested_roots(const FeederModel& model) const;
};

// Assigns every node below root r to area r unless a deeper root claims it
// first (nested roots resolve innermost-first).  Remaining nodes, slack
// included, form the unclustered set.
AreaPartition partition(const FeederModel& model, const std::vector<int>& roots);

}  // namespace dsse
