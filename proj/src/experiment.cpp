#include "mdsd/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "mdsd/alpha.hpp"
#include "mdsd/draft.hpp"
#include "mdsd/logits_io.hpp"
#include "mdsd/montecarlo.hpp"
#include "mdsd/random.hpp"
#include "mdsd/verify.hpp"

namespace mdsd {

namespace {

const std::vector<std::string_view> kSchemes{"w", "wo", "greedy", "spechub"};
const std::vector<std::string_view> kMethods{"ot",     "rrs",           "rrs-exact", "kseq",
                                             "kseq-closed", "greedy", "greedy-closed", "optimal"};

std::uint64_t fnv1a(std::string_view text, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string format_hash(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

bool known(const std::vector<std::string_view>& names, const std::string& name) {
  return std::find(names.begin(), names.end(), name) != names.end();
}

bool is_monte_carlo(std::string_view method) { return method == "ot" || method == "rrs" || method == "kseq" || method == "greedy"; }

/// Whether the method is defined for the scheme, given the draft count.
bool pair_supported(std::string_view scheme, std::string_view method, std::size_t n) {
  if (method == "optimal") return true;
  if (method == "ot") return n == 1 && scheme != "spechub";
  if (scheme == "w") return method == "rrs" || method == "rrs-exact" || method == "kseq" || method == "kseq-closed";
  if (scheme == "wo") return method == "rrs";
  if (scheme == "greedy") return method == "greedy" || method == "greedy-closed";
  return false;
}

DraftScheme build_scheme(std::string_view name, const Dist& q, std::size_t n) {
  if (name == "w") return DraftScheme::with_replacement(q, n);
  if (name == "wo") return DraftScheme::without_replacement(q, n);
  if (name == "greedy") return DraftScheme::greedy(q, n);
  return DraftScheme::spechub(q);
}

Method kernel_method(std::string_view scheme, std::string_view method) {
  if (method == "ot") return Method::OtSingle;
  if (method == "kseq") return Method::Kseq;
  if (method == "greedy") return Method::Greedy;
  return scheme == "wo" ? Method::RrsWithout : Method::RrsWith;
}

std::string skip_warning(std::string_view scheme, std::string_view method, std::size_t n) {
  std::ostringstream os;
  os << "skipping method '" << method << "' for scheme '" << scheme << "' with " << n
     << " drafts: incompatible verifier/scheme pair";
  return os.str();
}

class WarningLog {
 public:
  void add(const std::string& w) {
    if (seen_.insert(w).second) ordered_.push_back(w);
  }
  std::vector<std::string> take() { return std::move(ordered_); }

 private:
  std::set<std::string> seen_;
  std::vector<std::string> ordered_;
};

struct Accumulator {
  ResultRow proto;
  std::size_t count = 0;
  double sum_alpha = 0.0;
  double sum_alpha_sq = 0.0;
  double sum_alpha_star = 0.0;
  double sum_gap = 0.0;
  double last_std_error = 0.0;

  void add(const ResultRow& r) {
    ++count;
    sum_alpha += r.alpha;
    sum_alpha_sq += r.alpha * r.alpha;
    sum_alpha_star += r.alpha_star;
    sum_gap += r.gap;
    last_std_error = r.std_error;
  }

  ResultRow finish() const {
    ResultRow r = proto;
    const double n = static_cast<double>(count);
    r.position = "mean";
    r.count = count;
    r.mc_seed = 0;
    r.alpha = sum_alpha / n;
    r.alpha_star = sum_alpha_star / n;
    r.gap = sum_gap / n;
    if (count > 1) {
      const double var = std::max(0.0, (sum_alpha_sq - n * r.alpha * r.alpha) / (n - 1.0));
      r.std_error = std::sqrt(var / n);
    } else {
      r.std_error = last_std_error;
    }
    return r;
  }
};

}  // namespace

std::string ExperimentConfig::canonical() const {
  std::ostringstream os;
  os.precision(17);
  if (synth) {
    os << "synth=" << synth->to_string() << ";vocab=" << vocab << ";positions=" << positions;
  } else {
    os << "input=" << input_path;
  }
  os << ";temperature=" << temperature << ";num_drafts=" << num_drafts << ";schemes=";
  for (const auto& s : schemes) os << s << ',';
  os << ";methods=";
  for (const auto& m : methods) os << m << ',';
  os << ";trials=" << trials << ";seed=" << seed << ";sweep="
     << (sweep == SweepAxis::None ? "none" : sweep == SweepAxis::Temperature ? "temperature" : "drafts") << ':';
  for (double v : sweep_values) os << v << ',';
  return os.str();
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a(canonical()); }

void ExperimentConfig::validate() const {
  if (!synth && input_path.empty()) throw Error("no input: give a logits file or a synthetic generator");
  if (synth && vocab < 2) throw Error("synthetic vocabulary must have at least 2 tokens");
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) throw Error("temperature must be finite and >= 0");
  if (num_drafts < 1) throw Error("num_drafts must be >= 1");
  if (trials < 1) throw Error("trials must be >= 1");
  if (schemes.empty()) throw Error("no schemes selected");
  if (methods.empty()) throw Error("no methods selected");
  for (const auto& s : schemes) {
    if (!known(kSchemes, s)) throw Error("unknown scheme: " + s);
  }
  for (const auto& m : methods) {
    if (!known(kMethods, m)) throw Error("unknown method: " + m);
  }
  if (sweep != SweepAxis::None && sweep_values.empty()) throw Error("sweep requires at least one value");
  for (double v : sweep_values) {
    if (!std::isfinite(v) || v < 0.0) throw Error("sweep values must be finite and >= 0");
    if (sweep == SweepAxis::Drafts && (v < 1.0 || v != std::floor(v))) {
      throw Error("draft-count sweep values must be positive integers");
    }
  }
}

std::vector<Setting> settings_of(const ExperimentConfig& cfg) {
  std::vector<Setting> out;
  switch (cfg.sweep) {
    case SweepAxis::None:
      out.push_back({cfg.temperature, cfg.num_drafts});
      break;
    case SweepAxis::Temperature:
      for (double t : cfg.sweep_values) out.push_back({t, cfg.num_drafts});
      break;
    case SweepAxis::Drafts:
      for (double n : cfg.sweep_values) out.push_back({cfg.temperature, static_cast<std::size_t>(n)});
      break;
  }
  return out;
}

std::vector<double> parse_range(std::string_view text) {
  std::vector<double> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t colon = text.find(':', start);
    const std::string piece(text.substr(start, colon == std::string_view::npos ? text.npos : colon - start));
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(piece, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (piece.empty() || used != piece.size() || !std::isfinite(v)) {
      throw Error("range must look like start:stop:step, got '" + std::string(text) + "'");
    }
    parts.push_back(v);
    if (colon == std::string_view::npos) break;
    start = colon + 1;
  }
  if (parts.size() == 1) return parts;
  if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0]) {
    throw Error("range must look like start:stop:step with step > 0 and stop >= start, got '" + std::string(text) + "'");
  }
  std::vector<double> out;
  const double span = (parts[1] - parts[0]) / parts[2];
  const auto steps = static_cast<std::size_t>(std::floor(span + 1e-9));
  if (steps > 100000) throw Error("range has too many values");
  for (std::size_t k = 0; k <= steps; ++k) {
    // Round to 12 significant digits so 0.1-style steps print cleanly.
    const double v = parts[0] + static_cast<double>(k) * parts[2];
    out.push_back(std::stod(format_number(std::round(v * 1e12) / 1e12)));
  }
  return out;
}

PositionResult evaluate_position(const ExperimentConfig& cfg, const LogitsRecord& record, std::size_t index) {
  PositionResult result;
  result.index = index;
  if (record.p_logits.size() != record.q_logits.size()) throw Error("ragged logits record");
  const std::uint64_t position_seed = mix_seed(cfg.seed, index);

  for (const Setting& setting : settings_of(cfg)) {
    const Dist p = softmax_temp(record.p_logits, setting.temperature);
    const Dist q = softmax_temp(record.q_logits, setting.temperature);
    std::optional<KseqParams> kseq;

    for (const std::string& scheme_name : cfg.schemes) {
      const std::size_t n = scheme_name == "spechub" ? 2 : setting.num_drafts;
      std::optional<DraftScheme> scheme;
      try {
        scheme = build_scheme(scheme_name, q, n);
      } catch (const Error& e) {
        result.warnings.push_back("skipping scheme '" + scheme_name + "' at position " + std::to_string(index) + ": " +
                                  e.what());
        continue;
      }
      const double alpha_star = alpha_scan(p, *scheme).alpha_star;

      for (const std::string& method : cfg.methods) {
        if (!pair_supported(scheme_name, method, n)) {
          result.warnings.push_back(skip_warning(scheme_name, method, n));
          continue;
        }
        ResultRow row;
        row.position = std::to_string(index);
        row.scheme = scheme_name;
        row.method = method;
        row.alpha_star = alpha_star;
        row.temperature = setting.temperature;
        row.num_drafts = n;
        row.seed = cfg.seed;

        if (is_monte_carlo(method)) {
          const std::uint64_t key = fnv1a(scheme_name + "/" + method + "/" + format_number(setting.temperature) +
                                          "/" + std::to_string(n));
          row.mc_seed = mix_seed(position_seed, key);
          std::unique_ptr<VerifierKernel> kernel;
          if (method == "kseq") {
            if (!kseq) kseq = kseq_solve(p, q, n);
            kernel = std::make_unique<KseqKernel>(p, q, *kseq);
          } else {
            kernel = make_kernel(kernel_method(scheme_name, method), p, *scheme);
          }
          const McReport mc = estimate_alpha(p, *scheme, *kernel, cfg.trials, row.mc_seed, 1);
          row.alpha = mc.acceptance_mean;
          row.std_error = mc.acceptance_stderr;
          row.trials = cfg.trials;
        } else if (method == "optimal") {
          row.alpha = alpha_star;
        } else if (method == "rrs-exact") {
          row.alpha = rrs_w_rate_exact(p, q, n);
        } else if (method == "kseq-closed") {
          if (!kseq) kseq = kseq_solve(p, q, n);
          row.alpha = kseq->alpha_closed;
        } else {  // greedy-closed
          row.alpha = alpha_greedy_closed(p, q, n);
        }
        row.gap = row.alpha - row.alpha_star;
        result.rows.push_back(std::move(row));
      }
    }
  }
  return result;
}

void write_header(std::ostream& out, ReportFormat format) {
  if (format == ReportFormat::Csv) {
    out << "position,scheme,method,alpha,alpha_star,gap,stderr,seed,temperature,num_drafts,trials,config_hash\n";
  }
}

void write_row(std::ostream& out, ReportFormat format, const ResultRow& r, std::uint64_t config_hash) {
  if (format == ReportFormat::Csv) {
    out << r.position << ',' << r.scheme << ',' << r.method << ',' << format_number(r.alpha) << ','
        << format_number(r.alpha_star) << ',' << format_number(r.gap) << ',' << format_number(r.std_error) << ','
        << r.seed << ',' << format_number(r.temperature) << ',' << r.num_drafts << ',' << r.trials << ','
        << format_hash(config_hash) << '\n';
    return;
  }
  const bool aggregate = r.position == "mean";
  out << "{\"position\":" << (aggregate ? "\"mean\"" : r.position) << ",\"scheme\":\"" << r.scheme
      << "\",\"method\":\"" << r.method << "\",\"alpha\":" << format_number(r.alpha)
      << ",\"alpha_star\":" << format_number(r.alpha_star) << ",\"gap\":" << format_number(r.gap)
      << ",\"stderr\":" << format_number(r.std_error) << ",\"seed\":" << r.seed << ",\"mc_seed\":" << r.mc_seed
      << ",\"temperature\":" << format_number(r.temperature) << ",\"num_drafts\":" << r.num_drafts
      << ",\"trials\":" << r.trials << ",\"count\":" << r.count << ",\"config_hash\":\"" << format_hash(config_hash)
      << "\"}\n";
}

ExperimentSummary run_experiment(const ExperimentConfig& cfg, const RecordSource& source, std::ostream& out) {
  cfg.validate();
  const std::uint64_t config_hash = cfg.hash();
  const unsigned threads = cfg.threads == 0 ? worker_threads() : cfg.threads;
  const std::size_t batch_size = std::max<std::size_t>(16, 4 * static_cast<std::size_t>(threads));

  WarningLog warnings;
  for (const std::string& s : cfg.schemes) {
    for (const Setting& setting : settings_of(cfg)) {
      const std::size_t n = s == "spechub" ? 2 : setting.num_drafts;
      for (const std::string& m : cfg.methods) {
        if (!pair_supported(s, m, n)) warnings.add(skip_warning(s, m, n));
      }
    }
  }

  std::vector<std::pair<std::string, Accumulator>> accumulators;
  std::map<std::string, std::size_t> accumulator_index;
  ExperimentSummary summary;
  write_header(out, cfg.format);

  std::vector<LogitsRecord> batch;
  std::vector<PositionResult> results;
  bool exhausted = false;
  while (!exhausted) {
    batch.clear();
    while (batch.size() < batch_size) {
      auto rec = source();
      if (!rec) {
        exhausted = true;
        break;
      }
      batch.push_back(std::move(*rec));
    }
    if (batch.empty()) break;

    const std::size_t base = summary.positions;
    results.assign(batch.size(), {});
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(threads, batch.size()));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
      for (std::size_t i = next++; i < batch.size(); i = next++) {
        try {
          results[i] = evaluate_position(cfg, batch[i], base + i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    };
    if (workers <= 1) {
      work();
    } else {
      std::vector<std::thread> pool;
      for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
      for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    for (const PositionResult& pr : results) {
      for (const auto& w : pr.warnings) warnings.add(w);
      for (const ResultRow& row : pr.rows) {
        write_row(out, cfg.format, row, config_hash);
        const std::string key = format_number(row.temperature) + '/' + std::to_string(row.num_drafts) + '/' +
                                row.scheme + '/' + row.method;
        auto [it, inserted] = accumulator_index.emplace(key, accumulators.size());
        if (inserted) accumulators.push_back({key, Accumulator{row}});
        accumulators[it->second].second.add(row);
      }
    }
    summary.positions += batch.size();
  }

  if (summary.positions == 0) warnings.add("input contains no positions; report has no rows");
  for (const auto& [key, acc] : accumulators) {
    summary.aggregates.push_back(acc.finish());
    write_row(out, cfg.format, summary.aggregates.back(), config_hash);
  }
  summary.warnings = warnings.take();
  return summary;
}

ExperimentSummary run_experiment(const ExperimentConfig& cfg, std::ostream& out) {
  cfg.validate();
  if (cfg.synth) {
    std::size_t produced = 0;
    const SynthSpec spec = *cfg.synth;
    return run_experiment(
        cfg,
        [&]() -> std::optional<LogitsRecord> {
          if (produced == cfg.positions) return std::nullopt;
          return synth_position(spec, cfg.vocab, cfg.seed, produced++);
        },
        out);
  }
  LogitsReader reader(cfg.input_path);
  return run_experiment(cfg, [&] { return reader.next(); }, out);
}

}  // namespace mdsd
