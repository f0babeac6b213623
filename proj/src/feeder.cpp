#include "dsse/feeder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace dsse {

Phase phase_from_letter(char c) {
  switch (c) {
    case 'a': case 'A': return Phase::A;
    case 'b': case 'B': return Phase::B;
    case 'c': case 'C': return Phase::C;
    default:
      throw ValidationError(std::string("unknown phase letter '") + c + "'");
  }
}

PhaseSet PhaseSet::parse(const std::string& letters) {
  PhaseSet set;
  for (char c : letters) set.add(phase_from_letter(c));
  if (set.empty()) throw ValidationError("empty phase set '" + letters + "'");
  return set;
}

int PhaseSet::count() const {
  int n = 0;
  for (int i = 0; i < 3; ++i) n += (bits_ >> i) & 1;
  return n;
}

std::vector<Phase> PhaseSet::list() const {
  std::vector<Phase> out;
  for (int i = 0; i < 3; ++i)
    if (bits_ & (1u << i)) out.push_back(static_cast<Phase>(i));
  return out;
}

std::string PhaseSet::str() const {
  std::string out;
  for (Phase ph : list()) out += phase_letter(ph);
  return out;
}

std::string node_kind_name(NodeKind kind) {
  switch (kind) {
    case NodeKind::Slack: return "slack";
    case NodeKind::Load: return "load";
    case NodeKind::ZeroInjection: return "zero_injection";
  }
  return "load";
}

NodeKind node_kind_from_name(const std::string& name) {
  if (name == "slack") return NodeKind::Slack;
  if (name == "load") return NodeKind::Load;
  if (name == "zero_injection") return NodeKind::ZeroInjection;
  throw ValidationError("unknown node kind '" + name + "'");
}

const PqBox& NodeRecord::box(Phase ph) const {
  // Nodes without stored boxes (slack, zero injection) pin to {(0,0)}.
  static const PqBox pinned{0.0, 0.0, 0.0, 0.0};
  int slot = 0;
  for (Phase candidate : phases.list()) {
    if (candidate == ph)
      return slot < static_cast<int>(boxes.size()) ? boxes[static_cast<size_t>(slot)]
                                                   : pinned;
    ++slot;
  }
  throw ValidationError("node " + std::to_string(id) + " has no phase " +
                        phase_letter(ph));
}

std::complex<double> LineRecord::z_entry(const PhaseSet& phases, Phase row,
                                         Phase col) const {
  const auto list = phases.list();
  int r = -1;
  int c = -1;
  for (size_t k = 0; k < list.size(); ++k) {
    if (list[k] == row) r = static_cast<int>(k);
    if (list[k] == col) c = static_cast<int>(k);
  }
  if (r < 0 || c < 0)
    throw ValidationError("line " + std::to_string(from) + "->" +
                          std::to_string(to) + " lacks phase pair " +
                          phase_letter(row) + phase_letter(col));
  return z(r, c);
}

namespace {

std::int64_t entry_key(int node, Phase ph) {
  return (static_cast<std::int64_t>(node) << 2) | static_cast<int>(ph);
}

}  // namespace

StateIndex::StateIndex(std::vector<Entry> entries) : entries_(std::move(entries)) {
  for (size_t k = 0; k < entries_.size(); ++k)
    lookup_[entry_key(entries_[k].node, entries_[k].phase)] = static_cast<int>(k);
}

int StateIndex::index_of(int node, Phase ph) const {
  auto it = lookup_.find(entry_key(node, ph));
  if (it == lookup_.end())
    throw ValidationError("no state entry for node " + std::to_string(node) +
                          " phase " + phase_letter(ph));
  return it->second;
}

std::optional<int> StateIndex::find(int node, Phase ph) const {
  auto it = lookup_.find(entry_key(node, ph));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

FeederModel FeederModel::from_records(std::vector<NodeRecord> nodes,
                                      std::vector<LineRecord> lines,
                                      Params params) {
  FeederModel model;
  model.params_ = params;
  std::sort(nodes.begin(), nodes.end(),
            [](const NodeRecord& a, const NodeRecord& b) { return a.id < b.id; });
  model.nodes_ = std::move(nodes);
  model.lines_ = std::move(lines);
  model.build_topology();
  return model;
}

int FeederModel::index_of(int id) const {
  auto it = id_to_index_.find(id);
  if (it == id_to_index_.end())
    throw ValidationError("unknown node id " + std::to_string(id));
  return it->second;
}

int FeederModel::parent(int id) const {
  const int line = parent_line(id);
  return line < 0 ? -1 : lines_[static_cast<size_t>(line)].from;
}

int FeederModel::parent_line(int id) const {
  return parent_line_[static_cast<size_t>(index_of(id))];
}

std::vector<int> FeederModel::subtree_nodes(int root_id) const {
  index_of(root_id);
  std::vector<int> out;
  std::vector<int> stack = {root_id};
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    out.push_back(id);
    for (int child : children(id)) stack.push_back(child);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void FeederModel::build_topology() {
  const int n = node_count();
  if (n == 0) throw ValidationError("feeder has no nodes");

  id_to_index_.clear();
  for (int k = 0; k < n; ++k) {
    const NodeRecord& rec = nodes_[static_cast<size_t>(k)];
    if (id_to_index_.count(rec.id))
      throw ValidationError("duplicate node id " + std::to_string(rec.id));
    id_to_index_[rec.id] = k;
    if (rec.phases.empty())
      throw ValidationError("node " + std::to_string(rec.id) + " has no phases");
    if (rec.kind == NodeKind::Load &&
        rec.boxes.size() != static_cast<size_t>(rec.phases.count()))
      throw ValidationError("node " + std::to_string(rec.id) +
                            " needs one feasible box per phase");
  }
  if (!id_to_index_.count(params_.slack_id))
    throw ValidationError("slack node " + std::to_string(params_.slack_id) +
                          " is missing");
  if (node(params_.slack_id).kind != NodeKind::Slack)
    throw ValidationError("node " + std::to_string(params_.slack_id) +
                          " must have kind 'slack'");
  for (const NodeRecord& rec : nodes_)
    if (rec.kind == NodeKind::Slack && rec.id != params_.slack_id)
      throw ValidationError("unexpected extra slack node " + std::to_string(rec.id));

  if (lines_.size() != static_cast<size_t>(n - 1))
    throw ValidationError("feeder with " + std::to_string(n) + " nodes needs " +
                          std::to_string(n - 1) + " lines, got " +
                          std::to_string(lines_.size()));

  parent_line_.assign(static_cast<size_t>(n), -1);
  children_.assign(static_cast<size_t>(n), {});
  std::set<std::pair<int, int>> seen;
  for (size_t e = 0; e < lines_.size(); ++e) {
    LineRecord& line = lines_[e];
    const int fi = index_of(line.from);
    const int ti = index_of(line.to);
    if (fi == ti)
      throw ValidationError("line " + std::to_string(line.from) +
                            "->" + std::to_string(line.to) + " is a self-loop");
    auto key = std::minmax(line.from, line.to);
    if (!seen.insert(key).second)
      throw ValidationError("duplicate line between " + std::to_string(key.first) +
                            " and " + std::to_string(key.second));
    if (parent_line_[static_cast<size_t>(ti)] >= 0)
      throw ValidationError("node " + std::to_string(line.to) +
                            " has two parents; feeder is not a tree");
    if (line.to == params_.slack_id)
      throw ValidationError("slack node cannot be a line's downstream endpoint");
    const NodeRecord& to_rec = nodes_[static_cast<size_t>(ti)];
    const int dim = to_rec.phases.count();
    if (line.z.rows() != dim || line.z.cols() != dim)
      throw ValidationError("line " + std::to_string(line.from) + "->" +
                            std::to_string(line.to) + " impedance must be " +
                            std::to_string(dim) + "x" + std::to_string(dim));
    parent_line_[static_cast<size_t>(ti)] = static_cast<int>(e);
    children_[static_cast<size_t>(fi)].push_back(line.to);
  }
  for (auto& kids : children_) std::sort(kids.begin(), kids.end());

  // Walk down from the slack; anything unreached is an orphan (or on a cycle
  // disconnected from the root, which the two-parents check above catches
  // when the cycle is reachable).
  depth_.assign(static_cast<size_t>(n), -1);
  path_.assign(static_cast<size_t>(n), {});
  by_depth_.clear();
  std::vector<int> queue = {params_.slack_id};
  depth_[static_cast<size_t>(index_of(params_.slack_id))] = 0;
  for (size_t head = 0; head < queue.size(); ++head) {
    const int id = queue[head];
    by_depth_.push_back(id);
    const int idx = index_of(id);
    const NodeRecord& rec = nodes_[static_cast<size_t>(idx)];
    for (int child : children_[static_cast<size_t>(idx)]) {
      const int ci = index_of(child);
      const NodeRecord& child_rec = nodes_[static_cast<size_t>(ci)];
      if (!child_rec.phases.subset_of(rec.phases))
        throw ValidationError("node " + std::to_string(child) + " carries phases " +
                              child_rec.phases.str() + " absent at its parent " +
                              std::to_string(id) + " (" + rec.phases.str() + ")");
      depth_[static_cast<size_t>(ci)] = depth_[static_cast<size_t>(idx)] + 1;
      path_[static_cast<size_t>(ci)] = path_[static_cast<size_t>(idx)];
      path_[static_cast<size_t>(ci)].push_back(parent_line_[static_cast<size_t>(ci)]);
      queue.push_back(child);
    }
  }
  for (const NodeRecord& rec : nodes_)
    if (depth_[static_cast<size_t>(index_of(rec.id))] < 0)
      throw ValidationError("node " + std::to_string(rec.id) +
                            " is not connected to the slack");

  std::vector<StateIndex::Entry> entries;
  for (const NodeRecord& rec : nodes_) {
    if (rec.id == params_.slack_id) continue;
    for (Phase ph : rec.phases.list()) entries.push_back({rec.id, ph});
  }
  index_ = StateIndex(std::move(entries));

  single_phase_ = true;
  for (const NodeRecord& rec : nodes_)
    if (!(rec.phases == PhaseSet::single(Phase::A))) single_phase_ = false;
}

std::vector<int> common_path(const FeederModel& model, int i, int j) {
  int a = i;
  int b = j;
  while (model.depth(a) > model.depth(b)) a = model.parent(a);
  while (model.depth(b) > model.depth(a)) b = model.parent(b);
  while (a != b) {
    a = model.parent(a);
    b = model.parent(b);
  }
  return model.path_lines(a);
}

FeederModel generate_feeder(const FeederSpec& spec) {
  if (spec.size < 1) throw ValidationError("feeder size must be at least 1");
  Rng rng(spec.seed);

  // Grow the tree node by node; parents are drawn uniformly among nodes that
  // still have child capacity, which yields realistic mixed chain/branch
  // layouts.
  std::vector<int> parent_of(static_cast<size_t>(spec.size) + 1, -1);
  std::vector<int> child_count(static_cast<size_t>(spec.size) + 1, 0);
  for (int id = 1; id <= spec.size; ++id) {
    std::vector<int> candidates;
    for (int p = 0; p < id; ++p)
      if (child_count[static_cast<size_t>(p)] < spec.max_children)
        candidates.push_back(p);
    const int parent = candidates[static_cast<size_t>(
        rng.uniform_int(0, static_cast<int>(candidates.size()) - 1))];
    parent_of[static_cast<size_t>(id)] = parent;
    ++child_count[static_cast<size_t>(parent)];
  }

  // Phase assignment honours the nesting rule: a child's set is a subset of
  // its parent's.  Single-phase mode keeps everything on phase a.
  std::vector<PhaseSet> phases(static_cast<size_t>(spec.size) + 1);
  phases[0] = spec.three_phase ? PhaseSet::abc() : PhaseSet::single(Phase::A);
  for (int id = 1; id <= spec.size; ++id) {
    const PhaseSet parent_set = phases[static_cast<size_t>(parent_of[static_cast<size_t>(id)])];
    if (!spec.three_phase || parent_set.count() == 1) {
      phases[static_cast<size_t>(id)] = parent_set;
      continue;
    }
    if (rng.uniform() < spec.full_phase_fraction) {
      phases[static_cast<size_t>(id)] = parent_set;
    } else {
      // Drop to a random single phase available at the parent.
      const auto avail = parent_set.list();
      phases[static_cast<size_t>(id)] =
          PhaseSet::single(avail[static_cast<size_t>(rng.uniform_int(
              0, static_cast<int>(avail.size()) - 1))]);
    }
  }

  // Load placement: an exact round(load_fraction * size) count, chosen by
  // shuffling.
  const int n_loads = std::max(
      1, static_cast<int>(std::lround(spec.load_fraction * spec.size)));
  std::vector<int> ids(static_cast<size_t>(spec.size));
  std::iota(ids.begin(), ids.end(), 1);
  for (int k = static_cast<int>(ids.size()) - 1; k > 0; --k)
    std::swap(ids[static_cast<size_t>(k)], ids[static_cast<size_t>(rng.uniform_int(0, k))]);
  std::vector<bool> is_load(static_cast<size_t>(spec.size) + 1, false);
  for (int k = 0; k < n_loads && k < static_cast<int>(ids.size()); ++k)
    is_load[static_cast<size_t>(ids[static_cast<size_t>(k)])] = true;

  // Peak loads: total_load_p split across load phases with a bounded spread
  // so WLS weights stay within a moderate range.
  int n_load_phases = 0;
  for (int id = 1; id <= spec.size; ++id)
    if (is_load[static_cast<size_t>(id)]) n_load_phases += phases[static_cast<size_t>(id)].count();
  const double mean_peak = spec.total_load_p / std::max(1, n_load_phases);
  const double tan_phi =
      std::tan(std::acos(std::clamp(spec.power_factor, 0.05, 1.0)));

  std::vector<NodeRecord> nodes;
  NodeRecord slack;
  slack.id = 0;
  slack.phases = phases[0];
  slack.kind = NodeKind::Slack;
  nodes.push_back(slack);
  for (int id = 1; id <= spec.size; ++id) {
    NodeRecord rec;
    rec.id = id;
    rec.phases = phases[static_cast<size_t>(id)];
    rec.kind = is_load[static_cast<size_t>(id)] ? NodeKind::Load : NodeKind::ZeroInjection;
    if (rec.kind == NodeKind::Load) {
      for (int k = 0; k < rec.phases.count(); ++k) {
        const double peak_p = mean_peak * rng.uniform(spec.load_spread, 1.0);
        const double peak_q = peak_p * tan_phi;
        PqBox box;
        box.p_min = -2.0 * peak_p;
        box.p_max = 0.0;
        box.q_min = -2.0 * peak_q;
        box.q_max = 2.0 * peak_q;
        rec.boxes.push_back(box);
      }
    }
    nodes.push_back(rec);
  }

  std::vector<LineRecord> lines;
  for (int id = 1; id <= spec.size; ++id) {
    LineRecord line;
    line.from = parent_of[static_cast<size_t>(id)];
    line.to = id;
    const int dim = phases[static_cast<size_t>(id)].count();
    line.z = Eigen::MatrixXcd::Zero(dim, dim);
    for (int d = 0; d < dim; ++d)
      line.z(d, d) = {rng.uniform(spec.r_min, spec.r_max),
                      rng.uniform(spec.x_min, spec.x_max)};
    for (int r = 0; r < dim; ++r)
      for (int c = r + 1; c < dim; ++c) {
        const double scale = spec.mutual_scale * rng.uniform(0.5, 1.0);
        const std::complex<double> m = {
            scale * 0.5 * (line.z(r, r).real() + line.z(c, c).real()),
            scale * 0.5 * (line.z(r, r).imag() + line.z(c, c).imag())};
        line.z(r, c) = m;
        line.z(c, r) = m;
      }
    lines.push_back(line);
  }

  return FeederModel::from_records(std::move(nodes), std::move(lines), {});
}

Injections nominal_injections(const FeederModel& model, double utilization) {
  const StateIndex& index = model.state_index();
  Injections inj = Injections::zero(index.size());
  for (int k = 0; k < index.size(); ++k) {
    const auto& entry = index.entry(k);
    const NodeRecord& rec = model.node(entry.node);
    if (rec.kind != NodeKind::Load) continue;
    const PqBox& box = rec.box(entry.phase);
    inj.p[k] = 0.5 * box.p_min * utilization;
    inj.q[k] = -0.5 * box.q_max * utilization;
  }
  return inj;
}

bool AreaPartition::contains_nested_roots(const FeederModel& model) const {
  for (const Area& outer : areas)
    for (const Area& inner : areas) {
      if (outer.id == inner.id) continue;
      int walk = inner.root;
      while (walk >= 0) {
        walk = model.parent(walk);
        if (walk == outer.root) return true;
      }
    }
  return false;
}

AreaPartition partition(const FeederModel& model, const std::vector<int>& roots) {
  std::set<int> seen;
  for (int root : roots) {
    model.index_of(root);
    if (root == model.slack_id())
      throw ValidationError("slack node cannot be an area root");
    if (!seen.insert(root).second)
      throw ValidationError("duplicate area root " + std::to_string(root));
  }

  AreaPartition out;
  out.areas.resize(roots.size());
  for (size_t k = 0; k < roots.size(); ++k) {
    out.areas[k].id = static_cast<int>(k);
    out.areas[k].root = roots[k];
  }

  // Nearest ancestor root (self included) claims the node, so nested roots
  // resolve innermost-first.
  std::unordered_map<int, int> root_to_area;
  for (size_t k = 0; k < roots.size(); ++k) root_to_area[roots[k]] = static_cast<int>(k);
  for (const NodeRecord& rec : model.nodes()) {
    int walk = rec.id;
    int area = -1;
    while (walk >= 0) {
      auto it = root_to_area.find(walk);
      if (it != root_to_area.end()) {
        area = it->second;
        break;
      }
      walk = model.parent(walk);
    }
    if (area >= 0)
      out.areas[static_cast<size_t>(area)].nodes.push_back(rec.id);
    else
      out.unclustered.push_back(rec.id);
  }
  for (Area& area : out.areas)
    std::sort(area.nodes.begin(), area.nodes.end());
  std::sort(out.unclustered.begin(), out.unclustered.end());
  return out;
}

}  // namespace dsse
