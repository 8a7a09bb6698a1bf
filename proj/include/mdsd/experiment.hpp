#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "mdsd/prob.hpp"
#include "mdsd/synth.hpp"

namespace mdsd {

enum class SweepAxis { None, Temperature, Drafts };
enum class ReportFormat { Csv, Jsonl };

/**
 * One benchmark run.
 *
 * Schemes: w (iid), wo (without replacement), greedy, spechub (always 2 drafts).
 * Methods: ot, rrs, rrs-exact, kseq, kseq-closed, greedy, greedy-closed, optimal.
 * "-exact"/"-closed" methods and "optimal" are computed in closed form; the
 * others are Monte Carlo estimates with `trials` steps per position.
 */
struct ExperimentConfig {
  std::string input_path;
  std::optional<SynthSpec> synth;
  std::size_t vocab = 1000;
  std::size_t positions = 128;

  double temperature = 0.7;
  std::size_t num_drafts = 3;
  std::vector<std::string> schemes{"w", "wo", "greedy"};
  std::vector<std::string> methods{"rrs", "rrs-exact", "kseq", "kseq-closed", "greedy", "greedy-closed", "optimal"};
  std::uint64_t trials = 10000;
  std::uint64_t seed = 0;

  SweepAxis sweep = SweepAxis::None;
  std::vector<double> sweep_values;

  ReportFormat format = ReportFormat::Csv;
  /// 0 = worker_threads().
  unsigned threads = 0;

  /// Stable textual form of every field that affects the numbers.
  std::string canonical() const;
  /// 64-bit FNV-1a of canonical().
  std::uint64_t hash() const;
  /// Throws Error on unknown names, bad sweep values or a missing input source.
  void validate() const;
};

/// (temperature, draft count) pairs the run iterates over, in sweep order.
struct Setting {
  double temperature;
  std::size_t num_drafts;
};
std::vector<Setting> settings_of(const ExperimentConfig& cfg);

/// Parses "start:stop:step" (inclusive of stop up to rounding).
std::vector<double> parse_range(std::string_view text);

/// One report line. Aggregate rows have position "mean" and count > 1.
struct ResultRow {
  std::string position;
  std::string scheme;
  std::string method;
  double alpha = 0.0;
  double alpha_star = 0.0;
  double gap = 0.0;
  double std_error = 0.0;
  double temperature = 0.0;
  std::size_t num_drafts = 0;
  std::uint64_t trials = 0;
  std::uint64_t seed = 0;
  /// Seed of the Monte Carlo substream for this row; 0 for closed forms.
  std::uint64_t mc_seed = 0;
  std::size_t count = 1;
};

struct PositionResult {
  std::size_t index = 0;
  std::vector<ResultRow> rows;
  std::vector<std::string> warnings;
};

/// All rows for one position. Monte Carlo runs single-threaded inside.
PositionResult evaluate_position(const ExperimentConfig& cfg, const LogitsRecord& record, std::size_t index);

struct ExperimentSummary {
  std::size_t positions = 0;
  std::vector<ResultRow> aggregates;
  std::vector<std::string> warnings;
};

/// Pulls records until nullopt.
using RecordSource = std::function<std::optional<LogitsRecord>()>;

/// Processes positions in parallel batches and writes rows in position order,
/// then one aggregate row per (setting, scheme, method).
ExperimentSummary run_experiment(const ExperimentConfig& cfg, const RecordSource& source, std::ostream& out);
/// Reads from cfg.input_path or generates cfg.synth positions.
ExperimentSummary run_experiment(const ExperimentConfig& cfg, std::ostream& out);

void write_header(std::ostream& out, ReportFormat format);
void write_row(std::ostream& out, ReportFormat format, const ResultRow& row, std::uint64_t config_hash);

}  // namespace mdsd
