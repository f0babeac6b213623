#pragma once

#include <string>
#include <vector>

#include "dsse/estimator.hpp"
#include "dsse/feeder.hpp"
#include "dsse/measurements.hpp"
#include "dsse/multiarea.hpp"
#include "dsse/observability.hpp"
#include "dsse/powerflow.hpp"
#include "dsse/sensitivity.hpp"

namespace dsse {

// Shortest decimal string that round-trips to the same double; keeps CSV
// output byte-deterministic without padding every column to 17 digits.
std::string format_double(double value);

// Feeder documents.  The structured format is a single versioned JSON file;
// the CSV pair (nodes.csv + lines.csv) carries the same information with one
// row per (node, phase) and one row per impedance entry.  Impedances may be
// given in ohms, in which case they are normalized by V_base^2 / S_base at
// load time.  All loaders throw IoError on unreadable files and
// ValidationError naming the offending record otherwise.
FeederModel load_feeder_json(const std::string& path);
void save_feeder_json(const FeederModel& model, const std::string& path);
FeederModel load_feeder_csv(const std::string& nodes_path,
                            const std::string& lines_path);
void save_feeder_csv(const FeederModel& model, const std::string& nodes_path,
                     const std::string& lines_path);
// Dispatch on extension: ".json" or a nodes.csv path with a sibling lines.csv.
FeederModel load_feeder(const std::string& path);

// Quasi-static scenario streams: one row per (tick, node, phase) with p, q
// and an optional per-entry squared-voltage reading column.
std::vector<Scenario> load_timeseries_csv(const std::string& path,
                                          const StateIndex& index);
void save_timeseries_csv(const std::vector<Scenario>& scenarios,
                         const StateIndex& index, const std::string& path);

void save_trace_csv(const std::vector<IterationRecord>& trace,
                    const std::string& path);

// Power flow solution next to the injections that produced it.
void save_solution_csv(const FeederModel& model, const Injections& inj,
                       const PowerFlowSolution& sol, const std::string& path);

// Dense sensitivity matrices for offline inspection.
void save_matrix_csv(const Eigen::MatrixXd& m, const std::string& path);
void save_sensitivity_csv(const SensitivityModel& sens,
                          const std::string& r_path, const std::string& x_path);

// One JSON record per protocol message, line-delimited.
void save_message_log(const std::vector<RoundMessage>& log,
                      const std::string& path);

void save_observability_json(const ObservabilityReport& report,
                             const std::string& path);
void save_null_basis_csv(const ObservabilityReport& report,
                         const std::string& path);

// Versioned measurement-set document; the loader rebuilds the state index
// from the serialized entries.
void save_measurement_set(const MeasurementSet& ms, const std::string& path);
MeasurementSet load_measurement_set(const std::string& path);

}  // namespace dsse
