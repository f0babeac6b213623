#include "dsse/sensitivity.hpp"

#include <algorithm>
#include <cmath>

namespace dsse {

namespace {

// Per-node prefix sums of line impedances along the path from the slack,
// padded to global 3x3 phase indexing.  The prefix at lca(i, j) is complete
// for every phase pair available there, which covers all pairs the
// sensitivity entries read.
std::vector<Eigen::Matrix3cd> impedance_prefixes(const FeederModel& model) {
  std::vector<Eigen::Matrix3cd> prefix(
      static_cast<size_t>(model.node_count()), Eigen::Matrix3cd::Zero());
  for (int id : model.nodes_by_depth()) {
    if (id == model.slack_id()) continue;
    const int line_idx = model.parent_line(id);
    const LineRecord& line = model.lines()[static_cast<size_t>(line_idx)];
    const PhaseSet phases = model.node(id).phases;
    Eigen::Matrix3cd padded = Eigen::Matrix3cd::Zero();
    const auto list = phases.list();
    for (size_t r = 0; r < list.size(); ++r)
      for (size_t c = 0; c < list.size(); ++c)
        padded(static_cast<int>(list[r]), static_cast<int>(list[c])) =
            line.z(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    prefix[static_cast<size_t>(model.index_of(id))] =
        prefix[static_cast<size_t>(model.index_of(line.from))] + padded;
  }
  return prefix;
}

int lca(const FeederModel& model, int i, int j) {
  while (model.depth(i) > model.depth(j)) i = model.parent(i);
  while (model.depth(j) > model.depth(i)) j = model.parent(j);
  while (i != j) {
    i = model.parent(i);
    j = model.parent(j);
  }
  return i;
}

}  // namespace

std::complex<double> phase_rotation(Phase row, Phase col) {
  static const std::complex<double> table[5] = {
      // exp(-i 2 pi k / 3) for k = -2..2; cos(2 pi / 3) = -0.5 exactly.
      {-0.5, -std::sqrt(3.0) / 2.0},  // k = -2
      {-0.5, +std::sqrt(3.0) / 2.0},  // k = -1
      {1.0, 0.0},                     // k = 0
      {-0.5, -std::sqrt(3.0) / 2.0},  // k = +1
      {-0.5, +std::sqrt(3.0) / 2.0},  // k = +2
  };
  const int k = static_cast<int>(row) - static_cast<int>(col);
  return table[k + 2];
}

SensitivityPair sensitivity_from_block(const Eigen::Matrix3cd& z_conj,
                                       Phase row_phase, Phase col_phase) {
  const std::complex<double> c =
      z_conj(static_cast<int>(row_phase), static_cast<int>(col_phase)) *
      phase_rotation(row_phase, col_phase);
  return {2.0 * c.real(), -2.0 * c.imag()};
}

Eigen::Matrix3cd path_impedance_sum(const FeederModel& model, int i, int j) {
  model.index_of(i);
  model.index_of(j);
  const auto prefix = impedance_prefixes(model);
  return prefix[static_cast<size_t>(model.index_of(lca(model, i, j)))];
}

Eigen::Matrix3cd conjugated_path_impedance(const FeederModel& model, int i, int j) {
  return path_impedance_sum(model, i, j).conjugate();
}

SensitivityModel SensitivityModel::build(const FeederModel& model) {
  return model.is_single_phase() ? build_single_phase(model)
                                 : build_multi_phase(model);
}

SensitivityModel SensitivityModel::build_single_phase(const FeederModel& model) {
  if (!model.is_single_phase())
    throw ValidationError(
        "single-phase sensitivity requested on a multi-phase feeder");
  const StateIndex& index = model.state_index();
  const int n = index.size();

  // Scalar prefix sums of r and x along each node's path.
  std::vector<double> pr(static_cast<size_t>(model.node_count()), 0.0);
  std::vector<double> px(static_cast<size_t>(model.node_count()), 0.0);
  for (int id : model.nodes_by_depth()) {
    if (id == model.slack_id()) continue;
    const LineRecord& line = model.lines()[static_cast<size_t>(model.parent_line(id))];
    const size_t me = static_cast<size_t>(model.index_of(id));
    const size_t up = static_cast<size_t>(model.index_of(line.from));
    pr[me] = pr[up] + line.z(0, 0).real();
    px[me] = px[up] + line.z(0, 0).imag();
  }

  SensitivityModel out;
  out.mode_ = SensitivityMode::SinglePhase;
  out.index_ = index;
  out.R_.resize(n, n);
  out.X_.resize(n, n);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      const int anc = lca(model, index.entry(a).node, index.entry(b).node);
      const size_t ai = static_cast<size_t>(model.index_of(anc));
      out.R_(a, b) = 2.0 * pr[ai];
      out.X_(a, b) = 2.0 * px[ai];
    }
  }
  const double v0 = model.slack_voltage() * model.slack_voltage();
  out.v_tilde_ = Eigen::VectorXd::Constant(n, v0);
  return out;
}

SensitivityModel SensitivityModel::build_multi_phase(const FeederModel& model) {
  const StateIndex& index = model.state_index();
  const int n = index.size();
  const auto prefix = impedance_prefixes(model);

  SensitivityModel out;
  out.mode_ = SensitivityMode::MultiPhase;
  out.index_ = index;
  out.R_.resize(n, n);
  out.X_.resize(n, n);
  for (int a = 0; a < n; ++a) {
    const auto& ea = index.entry(a);
    for (int b = 0; b < n; ++b) {
      const auto& eb = index.entry(b);
      const int anc = lca(model, ea.node, eb.node);
      const Eigen::Matrix3cd z_conj =
          prefix[static_cast<size_t>(model.index_of(anc))].conjugate();
      const SensitivityPair pair =
          sensitivity_from_block(z_conj, ea.phase, eb.phase);
      out.R_(a, b) = pair.r;
      out.X_(a, b) = pair.x;
    }
  }
  const double v0 = model.slack_voltage() * model.slack_voltage();
  out.v_tilde_ = Eigen::VectorXd::Constant(n, v0);
  return out;
}

Eigen::VectorXd SensitivityModel::predict_voltage(const Injections& inj) const {
  return R_ * inj.p + X_ * inj.q + v_tilde_;
}

CompressedSensitivity CompressedSensitivity::build(const FeederModel& model,
                                                   const SensitivityModel& sens,
                                                   const AreaPartition& part) {
  if (part.contains_nested_roots(model))
    throw ValidationError(
        "block-compressed sensitivity requires non-nested area roots");

  CompressedSensitivity out;
  out.area_count_ = static_cast<int>(part.areas.size());
  out.index_ = sens.index();
  const int n = out.index_.size();

  std::unordered_map<int, int> area_of_node;
  for (const Area& area : part.areas)
    for (int id : area.nodes) area_of_node[id] = area.id;

  std::vector<int> uncl_nodes;
  for (int id : part.unclustered)
    if (id != model.slack_id()) uncl_nodes.push_back(id);
  std::unordered_map<int, int> uncl_slot_of_node;
  for (size_t s = 0; s < uncl_nodes.size(); ++s)
    uncl_slot_of_node[uncl_nodes[s]] = static_cast<int>(s);

  out.area_of_entry_.assign(static_cast<size_t>(n), -1);
  out.pos_in_region_.assign(static_cast<size_t>(n), -1);
  out.uncl_slot_.assign(static_cast<size_t>(n), -1);
  std::vector<std::vector<int>> area_entries(part.areas.size());
  std::vector<int> uncl_entries;
  for (int k = 0; k < n; ++k) {
    const auto& entry = out.index_.entry(k);
    auto it = area_of_node.find(entry.node);
    if (it != area_of_node.end()) {
      out.area_of_entry_[static_cast<size_t>(k)] = it->second;
      out.pos_in_region_[static_cast<size_t>(k)] =
          static_cast<int>(area_entries[static_cast<size_t>(it->second)].size());
      area_entries[static_cast<size_t>(it->second)].push_back(k);
    } else {
      out.pos_in_region_[static_cast<size_t>(k)] = static_cast<int>(uncl_entries.size());
      out.uncl_slot_[static_cast<size_t>(k)] = uncl_slot_of_node.at(entry.node);
      uncl_entries.push_back(k);
    }
  }

  const auto prefix = impedance_prefixes(model);
  auto conj_block = [&](int i, int j) {
    return prefix[static_cast<size_t>(model.index_of(lca(model, i, j)))]
        .conjugate()
        .eval();
  };

  out.root_blocks_.assign(
      static_cast<size_t>(out.area_count_ * out.area_count_),
      Eigen::Matrix3cd::Zero());
  for (const Area& h : part.areas)
    for (const Area& k : part.areas)
      if (h.id != k.id)
        out.root_blocks_[static_cast<size_t>(h.id * out.area_count_ + k.id)] =
            conj_block(h.root, k.root);

  out.uncl_area_blocks_.assign(
      uncl_nodes.size() * static_cast<size_t>(out.area_count_),
      Eigen::Matrix3cd::Zero());
  for (size_t s = 0; s < uncl_nodes.size(); ++s)
    for (const Area& k : part.areas)
      out.uncl_area_blocks_[s * static_cast<size_t>(out.area_count_) +
                            static_cast<size_t>(k.id)] =
          conj_block(uncl_nodes[s], k.root);

  for (const auto& entries : area_entries) {
    const int m = static_cast<int>(entries.size());
    Eigen::MatrixXd r(m, m);
    Eigen::MatrixXd x(m, m);
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) {
        r(a, b) = sens.R()(entries[static_cast<size_t>(a)], entries[static_cast<size_t>(b)]);
        x(a, b) = sens.X()(entries[static_cast<size_t>(a)], entries[static_cast<size_t>(b)]);
      }
    out.in_area_R_.push_back(std::move(r));
    out.in_area_X_.push_back(std::move(x));
  }

  const int u = static_cast<int>(uncl_entries.size());
  out.uncl_R_.resize(u, u);
  out.uncl_X_.resize(u, u);
  for (int a = 0; a < u; ++a)
    for (int b = 0; b < u; ++b) {
      out.uncl_R_(a, b) = sens.R()(uncl_entries[static_cast<size_t>(a)],
                                   uncl_entries[static_cast<size_t>(b)]);
      out.uncl_X_(a, b) = sens.X()(uncl_entries[static_cast<size_t>(a)],
                                   uncl_entries[static_cast<size_t>(b)]);
    }
  return out;
}

SensitivityPair CompressedSensitivity::entry(int row_entry, int col_entry) const {
  const int ra = area_of_entry_[static_cast<size_t>(row_entry)];
  const int ca = area_of_entry_[static_cast<size_t>(col_entry)];
  const Phase rp = index_.entry(row_entry).phase;
  const Phase cp = index_.entry(col_entry).phase;
  const int rpos = pos_in_region_[static_cast<size_t>(row_entry)];
  const int cpos = pos_in_region_[static_cast<size_t>(col_entry)];

  if (ra >= 0 && ra == ca)
    return {in_area_R_[static_cast<size_t>(ra)](rpos, cpos),
            in_area_X_[static_cast<size_t>(ra)](rpos, cpos)};
  if (ra < 0 && ca < 0) return {uncl_R_(rpos, cpos), uncl_X_(rpos, cpos)};
  if (ra >= 0 && ca >= 0)
    return sensitivity_from_block(
        root_blocks_[static_cast<size_t>(ra * area_count_ + ca)], rp, cp);
  // One side unclustered: the stored block is symmetric, so it serves both
  // orientations with the right phase arguments.
  const int slot = ra < 0 ? uncl_slot_[static_cast<size_t>(row_entry)]
                          : uncl_slot_[static_cast<size_t>(col_entry)];
  const int area = ra < 0 ? ca : ra;
  const Eigen::Matrix3cd& block =
      uncl_area_blocks_[static_cast<size_t>(slot) * static_cast<size_t>(area_count_) +
                        static_cast<size_t>(area)];
  return sensitivity_from_block(block, rp, cp);
}

Eigen::MatrixXd CompressedSensitivity::reconstruct_R() const {
  const int n = index_.size();
  Eigen::MatrixXd out(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) out(a, b) = entry(a, b).r;
  return out;
}

Eigen::MatrixXd CompressedSensitivity::reconstruct_X() const {
  const int n = index_.size();
  Eigen::MatrixXd out(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) out(a, b) = entry(a, b).x;
  return out;
}

std::size_t CompressedSensitivity::stored_scalars() const {
  std::size_t total = root_blocks_.size() * 18 + uncl_area_blocks_.size() * 18;
  for (const auto& m : in_area_R_) total += 2 * static_cast<std::size_t>(m.size());
  total += 2 * static_cast<std::size_t>(uncl_R_.size());
  return total;
}

std::size_t CompressedSensitivity::dense_scalars() const {
  const std::size_t n = static_cast<std::size_t>(index_.size());
  return 2 * n * n;
}

}  // namespace dsse
