#include "dsse/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace dsse {

namespace {

using nlohmann::json;

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& ex) {
    throw IoError("malformed json in '" + path + "': " + ex.what());
  }
  return doc;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path + "'");
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return in;
}

std::string fmt(double value) { return format_double(value); }

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    size_t used = 0;
    double value = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return value;
  } catch (const std::exception&) {
    throw IoError("bad numeric field '" + s + "' in " + where);
  }
}

int parse_int(const std::string& s, const std::string& where) {
  try {
    size_t used = 0;
    int value = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return value;
  } catch (const std::exception&) {
    throw IoError("bad integer field '" + s + "' in " + where);
  }
}

// Data rows of a CSV file, skipping the schema comment and the header.
std::vector<std::vector<std::string>> read_csv_rows(const std::string& path,
                                                    size_t min_fields) {
  std::ifstream in = open_in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool header_seen = false;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() < min_fields)
      throw IoError(path + ":" + std::to_string(line_no) + ": expected at least " +
                    std::to_string(min_fields) + " fields");
    rows.push_back(std::move(fields));
  }
  return rows;
}

json box_to_json(const PqBox& box) {
  return json{{"p_min", box.p_min},
              {"p_max", box.p_max},
              {"q_min", box.q_min},
              {"q_max", box.q_max}};
}

PqBox box_from_json(const json& j, const std::string& where) {
  PqBox box;
  try {
    box.p_min = j.at("p_min").get<double>();
    box.p_max = j.at("p_max").get<double>();
    box.q_min = j.at("q_min").get<double>();
    box.q_max = j.at("q_max").get<double>();
  } catch (const json::exception& ex) {
    throw ValidationError("bad box for " + where + ": " + ex.what());
  }
  return box;
}

}  // namespace

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  for (int prec = 1; prec < 17; ++prec) {
    char probe[40];
    std::snprintf(probe, sizeof(probe), "%.*g", prec, value);
    if (std::strtod(probe, nullptr) == value) return probe;
  }
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

FeederModel load_feeder_json(const std::string& path) {
  json doc = read_json(path);
  if (!doc.is_object()) throw ValidationError("feeder document must be an object");
  if (doc.value("format_version", 0) != 1)
    throw ValidationError("unsupported feeder format_version");

  FeederModel::Params params;
  params.base_voltage = doc.value("base_voltage_v", params.base_voltage);
  params.base_power = doc.value("base_power_va", params.base_power);
  params.slack_id = doc.value("slack_id", params.slack_id);
  params.slack_voltage = doc.value("slack_voltage_pu", params.slack_voltage);

  const std::string unit = doc.value("impedance_unit", std::string("pu"));
  double z_scale = 1.0;
  if (unit == "ohm")
    z_scale = params.base_power / (params.base_voltage * params.base_voltage);
  else if (unit != "pu")
    throw ValidationError("impedance_unit must be 'pu' or 'ohm', got '" + unit + "'");

  std::vector<NodeRecord> nodes;
  for (const json& jn : doc.value("nodes", json::array())) {
    NodeRecord node;
    if (!jn.contains("id")) throw ValidationError("node record without id");
    node.id = jn.at("id").get<int>();
    const std::string where = "node " + std::to_string(node.id);
    node.phases = PhaseSet::parse(jn.value("phases", std::string("a")));
    node.kind = node_kind_from_name(jn.value("kind", std::string("load")));
    const json jbox = jn.value("box", json::object());
    if (node.kind == NodeKind::Load)
      for (Phase ph : node.phases.list()) {
        std::string key(1, phase_letter(ph));
        if (jbox.contains(key))
          node.boxes.push_back(box_from_json(jbox.at(key), where));
        else
          node.boxes.push_back(PqBox{});
      }
    nodes.push_back(std::move(node));
  }

  std::vector<LineRecord> lines;
  std::map<int, PhaseSet> phases_of;
  for (const NodeRecord& n : nodes) phases_of[n.id] = n.phases;
  for (const json& jl : doc.value("lines", json::array())) {
    LineRecord line;
    line.from = jl.value("from", -1);
    line.to = jl.value("to", -1);
    const std::string where =
        "line " + std::to_string(line.from) + "-" + std::to_string(line.to);
    auto it = phases_of.find(line.to);
    if (it == phases_of.end())
      throw ValidationError(where + " references unknown node " + std::to_string(line.to));
    std::vector<Phase> phases = it->second.list();
    const int m = static_cast<int>(phases.size());
    line.z = Eigen::MatrixXcd::Zero(m, m);
    const json jz = jl.value("z", json::object());
    for (const auto& [key, value] : jz.items()) {
      if (key.size() != 2) throw ValidationError(where + ": bad impedance key '" + key + "'");
      Phase row = phase_from_letter(key[0]);
      Phase col = phase_from_letter(key[1]);
      int r = -1, c = -1;
      for (int k = 0; k < m; ++k) {
        if (phases[static_cast<size_t>(k)] == row) r = k;
        if (phases[static_cast<size_t>(k)] == col) c = k;
      }
      if (r < 0 || c < 0)
        throw ValidationError(where + ": impedance key '" + key +
                              "' outside the phases of node " + std::to_string(line.to));
      if (!value.is_array() || value.size() != 2)
        throw ValidationError(where + ": impedance '" + key + "' must be [r, x]");
      std::complex<double> z(value[0].get<double>(), value[1].get<double>());
      line.z(r, c) = z * z_scale;
      line.z(c, r) = z * z_scale;
    }
    lines.push_back(std::move(line));
  }

  return FeederModel::from_records(std::move(nodes), std::move(lines), params);
}

void save_feeder_json(const FeederModel& model, const std::string& path) {
  json doc;
  doc["format_version"] = 1;
  doc["base_voltage_v"] = model.base_voltage();
  doc["base_power_va"] = model.base_power();
  doc["impedance_unit"] = "pu";
  doc["slack_id"] = model.slack_id();
  doc["slack_voltage_pu"] = model.slack_voltage();

  json jnodes = json::array();
  for (const NodeRecord& node : model.nodes()) {
    json jn;
    jn["id"] = node.id;
    jn["phases"] = node.phases.str();
    jn["kind"] = node_kind_name(node.kind);
    if (node.kind == NodeKind::Load) {
      json jbox;
      for (Phase ph : node.phases.list())
        jbox[std::string(1, phase_letter(ph))] = box_to_json(node.box(ph));
      jn["box"] = jbox;
    }
    jnodes.push_back(std::move(jn));
  }
  doc["nodes"] = std::move(jnodes);

  json jlines = json::array();
  for (const LineRecord& line : model.lines()) {
    json jl;
    jl["from"] = line.from;
    jl["to"] = line.to;
    json jz;
    std::vector<Phase> phases = model.node(line.to).phases.list();
    for (size_t r = 0; r < phases.size(); ++r)
      for (size_t c = r; c < phases.size(); ++c) {
        std::complex<double> z = line.z(static_cast<Eigen::Index>(r),
                                        static_cast<Eigen::Index>(c));
        std::string key{phase_letter(phases[r]), phase_letter(phases[c])};
        jz[key] = json::array({z.real(), z.imag()});
      }
    jl["z"] = std::move(jz);
    jlines.push_back(std::move(jl));
  }
  doc["lines"] = std::move(jlines);

  write_text(path, doc.dump(2) + "\n");
}

FeederModel load_feeder_csv(const std::string& nodes_path,
                            const std::string& lines_path) {
  std::map<int, NodeRecord> nodes;
  std::map<int, std::vector<Phase>> node_phases;
  for (const auto& row : read_csv_rows(nodes_path, 7)) {
    int id = parse_int(row[0], nodes_path);
    if (row[1].size() != 1) throw IoError(nodes_path + ": bad phase '" + row[1] + "'");
    Phase ph = phase_from_letter(row[1][0]);
    NodeRecord& node = nodes[id];
    node.id = id;
    node.kind = node_kind_from_name(row[2]);
    if (node.phases.has(ph))
      throw ValidationError("duplicate row for node " + std::to_string(id) +
                            " phase " + row[1]);
    node.phases.add(ph);
    node_phases[id].push_back(ph);
    PqBox box;
    box.p_min = parse_double(row[3], nodes_path);
    box.p_max = parse_double(row[4], nodes_path);
    box.q_min = parse_double(row[5], nodes_path);
    box.q_max = parse_double(row[6], nodes_path);
    node.boxes.push_back(box);
  }
  // Boxes arrive in row order; reorder them to ascending phase.
  std::vector<NodeRecord> node_list;
  for (auto& [id, node] : nodes) {
    std::vector<PqBox> ordered;
    for (Phase ph : node.phases.list()) {
      const std::vector<Phase>& seen = node_phases[id];
      for (size_t k = 0; k < seen.size(); ++k)
        if (seen[k] == ph) ordered.push_back(node.boxes[k]);
    }
    node.boxes = std::move(ordered);
    node_list.push_back(std::move(node));
  }

  // Rows of one line are adjacent in saved files but need not be; keep the
  // first-appearance order so a save/load cycle is the identity.
  std::vector<LineRecord> line_list;
  std::map<std::pair<int, int>, size_t> line_pos;
  for (const auto& row : read_csv_rows(lines_path, 6)) {
    int from = parse_int(row[0], lines_path);
    int to = parse_int(row[1], lines_path);
    if (row[2].size() != 1 || row[3].size() != 1)
      throw IoError(lines_path + ": bad phase pair");
    Phase pr = phase_from_letter(row[2][0]);
    Phase pc = phase_from_letter(row[3][0]);
    auto it = std::find_if(node_list.begin(), node_list.end(),
                           [to](const NodeRecord& n) { return n.id == to; });
    if (it == node_list.end())
      throw ValidationError("line references unknown node " + std::to_string(to));
    std::vector<Phase> phases = it->phases.list();
    const int m = static_cast<int>(phases.size());
    auto [pos, inserted] = line_pos.try_emplace({from, to}, line_list.size());
    if (inserted) line_list.emplace_back();
    LineRecord& line = line_list[pos->second];
    if (line.z.size() == 0) {
      line.from = from;
      line.to = to;
      line.z = Eigen::MatrixXcd::Zero(m, m);
    }
    int r = -1, c = -1;
    for (int k = 0; k < m; ++k) {
      if (phases[static_cast<size_t>(k)] == pr) r = k;
      if (phases[static_cast<size_t>(k)] == pc) c = k;
    }
    if (r < 0 || c < 0)
      throw ValidationError("impedance row outside the phases of node " +
                            std::to_string(to));
    std::complex<double> z(parse_double(row[4], lines_path),
                           parse_double(row[5], lines_path));
    line.z(r, c) = z;
    line.z(c, r) = z;
  }

  return FeederModel::from_records(std::move(node_list), std::move(line_list), {});
}

void save_feeder_csv(const FeederModel& model, const std::string& nodes_path,
                     const std::string& lines_path) {
  std::ofstream nout = open_out(nodes_path);
  nout << "# schema: feeder-nodes v1\n";
  nout << "id,phase,kind,p_min,p_max,q_min,q_max\n";
  for (const NodeRecord& node : model.nodes())
    for (Phase ph : node.phases.list()) {
      const PqBox& box = node.box(ph);
      nout << node.id << ',' << phase_letter(ph) << ',' << node_kind_name(node.kind)
           << ',' << fmt(box.p_min) << ',' << fmt(box.p_max) << ',' << fmt(box.q_min)
           << ',' << fmt(box.q_max) << '\n';
    }

  std::ofstream lout = open_out(lines_path);
  lout << "# schema: feeder-lines v1\n";
  lout << "from,to,phase_row,phase_col,r,x\n";
  for (const LineRecord& line : model.lines()) {
    std::vector<Phase> phases = model.node(line.to).phases.list();
    for (size_t r = 0; r < phases.size(); ++r)
      for (size_t c = r; c < phases.size(); ++c) {
        std::complex<double> z = line.z(static_cast<Eigen::Index>(r),
                                        static_cast<Eigen::Index>(c));
        lout << line.from << ',' << line.to << ',' << phase_letter(phases[r]) << ','
             << phase_letter(phases[c]) << ',' << fmt(z.real()) << ','
             << fmt(z.imag()) << '\n';
      }
  }
}

FeederModel load_feeder(const std::string& path) {
  std::filesystem::path p(path);
  if (p.extension() == ".json") return load_feeder_json(path);
  if (p.filename() == "nodes.csv") {
    std::filesystem::path lines = p.parent_path() / "lines.csv";
    return load_feeder_csv(path, lines.string());
  }
  if (std::filesystem::is_directory(p))
    return load_feeder_csv((p / "nodes.csv").string(), (p / "lines.csv").string());
  throw IoError("cannot infer feeder format from '" + path +
                "' (expected .json, nodes.csv, or a directory)");
}

std::vector<Scenario> load_timeseries_csv(const std::string& path,
                                          const StateIndex& index) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::map<std::int64_t, Scenario> ticks;
  std::map<std::int64_t, int> covered;
  for (const auto& row : read_csv_rows(path, 5)) {
    std::int64_t tick = parse_int(row[0], path);
    int node = parse_int(row[1], path);
    if (row[2].size() != 1) throw IoError(path + ": bad phase '" + row[2] + "'");
    Phase ph = phase_from_letter(row[2][0]);
    auto entry = index.find(node, ph);
    if (!entry)
      throw ValidationError("timeseries references unknown state entry node " +
                            std::to_string(node) + " phase " + row[2]);
    Scenario& sc = ticks[tick];
    if (sc.truth.p.size() == 0) {
      sc.tick = tick;
      sc.truth = Injections::zero(index.size());
    }
    sc.truth.p[*entry] = parse_double(row[3], path);
    sc.truth.q[*entry] = parse_double(row[4], path);
    if (row.size() > 5 && !row[5].empty()) {
      if (!sc.v_meas) sc.v_meas = Eigen::VectorXd::Constant(index.size(), nan);
      (*sc.v_meas)[*entry] = parse_double(row[5], path);
    }
    ++covered[tick];
  }
  std::vector<Scenario> out;
  for (auto& [tick, sc] : ticks) {
    if (covered[tick] != index.size())
      throw ValidationError("tick " + std::to_string(tick) + " covers " +
                            std::to_string(covered[tick]) + " of " +
                            std::to_string(index.size()) + " state entries");
    out.push_back(std::move(sc));
  }
  return out;
}

void save_timeseries_csv(const std::vector<Scenario>& scenarios,
                         const StateIndex& index, const std::string& path) {
  std::ofstream out = open_out(path);
  out << "# schema: timeseries v1\n";
  out << "tick,node,phase,p,q,v\n";
  for (const Scenario& sc : scenarios)
    for (int k = 0; k < index.size(); ++k) {
      const StateIndex::Entry& e = index.entry(k);
      out << sc.tick << ',' << e.node << ',' << phase_letter(e.phase) << ','
          << fmt(sc.truth.p[k]) << ',' << fmt(sc.truth.q[k]) << ',';
      if (sc.v_meas && !std::isnan((*sc.v_meas)[k])) out << fmt((*sc.v_meas)[k]);
      out << '\n';
    }
}

void save_trace_csv(const std::vector<IterationRecord>& trace,
                    const std::string& path) {
  std::ofstream out = open_out(path);
  out << "# schema: solver-trace v1\n";
  out << "iteration,objective,step_norm,voltage_delta,seconds\n";
  for (const IterationRecord& r : trace)
    out << r.iteration << ',' << fmt(r.objective) << ',' << fmt(r.step_norm) << ','
        << fmt(r.voltage_delta) << ',' << fmt(r.seconds) << '\n';
}

void save_solution_csv(const FeederModel& model, const Injections& inj,
                       const PowerFlowSolution& sol, const std::string& path) {
  const StateIndex& index = model.state_index();
  std::ofstream out = open_out(path);
  out << "# schema: powerflow-solution v1\n";
  out << "node,phase,V_mag,V_angle_rad,v,p,q\n";
  for (int k = 0; k < index.size(); ++k) {
    const StateIndex::Entry& e = index.entry(k);
    const std::complex<double> V = sol.voltage[k];
    out << e.node << ',' << phase_letter(e.phase) << ',' << fmt(std::abs(V)) << ','
        << fmt(std::arg(V)) << ',' << fmt(sol.v[k]) << ',' << fmt(inj.p[k]) << ','
        << fmt(inj.q[k]) << '\n';
  }
}

void save_matrix_csv(const Eigen::MatrixXd& m, const std::string& path) {
  std::ofstream out = open_out(path);
  out << "# schema: dense-matrix v1 rows=" << m.rows() << " cols=" << m.cols()
      << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << fmt(m(r, c));
    }
    out << '\n';
  }
}

void save_sensitivity_csv(const SensitivityModel& sens, const std::string& r_path,
                          const std::string& x_path) {
  save_matrix_csv(sens.R(), r_path);
  save_matrix_csv(sens.X(), x_path);
}

void save_message_log(const std::vector<RoundMessage>& log,
                      const std::string& path) {
  std::ofstream out = open_out(path);
  for (const RoundMessage& m : log) {
    json j;
    j["round"] = m.round;
    j["direction"] = message_direction_name(m.direction);
    j["area"] = m.area;
    j["kind"] = message_kind_name(m.kind);
    j["size_bytes"] = m.size_bytes();
    char digest[17];
    std::snprintf(digest, sizeof(digest), "%016llx",
                  static_cast<unsigned long long>(m.digest()));
    j["digest"] = digest;
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

void save_observability_json(const ObservabilityReport& report,
                             const std::string& path) {
  json doc;
  doc["format_version"] = 1;
  doc["state_dimension"] = report.state_dimension;
  doc["rank"] = report.rank;
  doc["index_percent"] = report.index_percent;
  doc["rows"] = report.H.rows();
  doc["observable"] = report.rank == report.state_dimension;
  doc["null_dimension"] = report.null_basis.cols();
  write_text(path, doc.dump(2) + "\n");
}

void save_null_basis_csv(const ObservabilityReport& report,
                         const std::string& path) {
  save_matrix_csv(report.null_basis, path);
}

void save_measurement_set(const MeasurementSet& ms, const std::string& path) {
  json doc;
  doc["format_version"] = 1;
  json entries = json::array();
  for (int k = 0; k < ms.size(); ++k) {
    const StateIndex::Entry& e = ms.index.entry(k);
    json je;
    je["node"] = e.node;
    je["phase"] = std::string(1, phase_letter(e.phase));
    je["box"] = json{{"p_min", ms.p_lo[k]},
                     {"p_max", ms.p_hi[k]},
                     {"q_min", ms.q_lo[k]},
                     {"q_max", ms.q_hi[k]}};
    if (ms.has_pseudo[static_cast<size_t>(k)])
      je["pseudo"] = json{{"p", ms.p_pseudo[k]},
                          {"q", ms.q_pseudo[k]},
                          {"sigma_p", ms.sigma_p[k]},
                          {"sigma_q", ms.sigma_q[k]}};
    entries.push_back(std::move(je));
  }
  doc["entries"] = std::move(entries);
  json meters = json::array();
  for (int m = 0; m < ms.meter_count(); ++m) {
    const StateIndex::Entry& e = ms.index.entry(ms.meters[static_cast<size_t>(m)]);
    meters.push_back(json{{"node", e.node},
                          {"phase", std::string(1, phase_letter(e.phase))},
                          {"v", ms.v_meas[m]},
                          {"sigma", ms.sigma_v[m]}});
  }
  doc["meters"] = std::move(meters);
  write_text(path, doc.dump(2) + "\n");
}

MeasurementSet load_measurement_set(const std::string& path) {
  json doc = read_json(path);
  if (doc.value("format_version", 0) != 1)
    throw ValidationError("unsupported measurement-set format_version");

  std::vector<StateIndex::Entry> index_entries;
  const json& entries = doc.at("entries");
  for (const json& je : entries) {
    StateIndex::Entry e;
    e.node = je.at("node").get<int>();
    std::string ph = je.at("phase").get<std::string>();
    if (ph.size() != 1) throw ValidationError("bad phase '" + ph + "'");
    e.phase = phase_from_letter(ph[0]);
    index_entries.push_back(e);
  }
  MeasurementSet ms;
  ms.index = StateIndex(std::move(index_entries));
  const int n = ms.index.size();
  ms.has_pseudo.assign(static_cast<size_t>(n), 0);
  ms.p_pseudo = Eigen::VectorXd::Zero(n);
  ms.q_pseudo = Eigen::VectorXd::Zero(n);
  ms.sigma_p = Eigen::VectorXd::Zero(n);
  ms.sigma_q = Eigen::VectorXd::Zero(n);
  ms.p_lo.resize(n);
  ms.p_hi.resize(n);
  ms.q_lo.resize(n);
  ms.q_hi.resize(n);
  for (int k = 0; k < n; ++k) {
    const json& je = entries[static_cast<size_t>(k)];
    const json& jb = je.at("box");
    ms.p_lo[k] = jb.at("p_min").get<double>();
    ms.p_hi[k] = jb.at("p_max").get<double>();
    ms.q_lo[k] = jb.at("q_min").get<double>();
    ms.q_hi[k] = jb.at("q_max").get<double>();
    if (je.contains("pseudo")) {
      const json& jp = je.at("pseudo");
      ms.has_pseudo[static_cast<size_t>(k)] = 1;
      ms.p_pseudo[k] = jp.at("p").get<double>();
      ms.q_pseudo[k] = jp.at("q").get<double>();
      ms.sigma_p[k] = jp.at("sigma_p").get<double>();
      ms.sigma_q[k] = jp.at("sigma_q").get<double>();
      if (ms.sigma_p[k] <= 0.0 || ms.sigma_q[k] <= 0.0)
        throw ValidationError("non-positive pseudo sigma at entry " +
                              std::to_string(k));
    }
  }
  std::vector<std::pair<int, std::pair<double, double>>> meter_rows;
  for (const json& jm : doc.value("meters", json::array())) {
    std::string ph = jm.at("phase").get<std::string>();
    int entry = ms.index.index_of(jm.at("node").get<int>(), phase_from_letter(ph[0]));
    meter_rows.push_back({entry,
                          {jm.at("v").get<double>(), jm.at("sigma").get<double>()}});
  }
  std::sort(meter_rows.begin(), meter_rows.end());
  ms.v_meas.resize(static_cast<Eigen::Index>(meter_rows.size()));
  ms.sigma_v.resize(static_cast<Eigen::Index>(meter_rows.size()));
  for (size_t m = 0; m < meter_rows.size(); ++m) {
    ms.meters.push_back(meter_rows[m].first);
    ms.v_meas[static_cast<Eigen::Index>(m)] = meter_rows[m].second.first;
    ms.sigma_v[static_cast<Eigen::Index>(m)] = meter_rows[m].second.second;
    if (meter_rows[m].second.second <= 0.0)
      throw ValidationError("non-positive meter sigma");
  }
  return ms;
}

}  // namespace dsse
