#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "mdsd/experiment.hpp"
#include "mdsd/logits_io.hpp"
#include "mdsd/synth.hpp"

using namespace mdsd;

namespace {

std::filesystem::path temp_file(const std::string& name, const std::string& contents) {
  const auto path = std::filesystem::temp_directory_path() / ("mdsd_test_" + name);
  std::ofstream(path) << contents;
  return path;
}

std::string log_record(const std::vector<double>& p, const std::vector<double>& q) {
  std::ostringstream os;
  os.precision(17);
  os << "{\"p_logits\": [";
  for (std::size_t i = 0; i < p.size(); ++i) os << (i ? "," : "") << std::log(p[i]);
  os << "], \"q_logits\": [";
  for (std::size_t i = 0; i < q.size(); ++i) os << (i ? "," : "") << std::log(q[i]);
  os << "]}";
  return os.str();
}

RecordSource from_vector(std::vector<LogitsRecord> records) {
  auto shared = std::make_shared<std::vector<LogitsRecord>>(std::move(records));
  auto next = std::make_shared<std::size_t>(0);
  return [shared, next]() -> std::optional<LogitsRecord> {
    if (*next == shared->size()) return std::nullopt;
    return (*shared)[(*next)++];
  };
}

const ResultRow* find_row(const std::vector<ResultRow>& rows, const std::string& scheme, const std::string& method) {
  for (const auto& r : rows) {
    if (r.scheme == scheme && r.method == method) return &r;
  }
  return nullptr;
}

}  // namespace

TEST_CASE("logits reader") {
  const auto two = temp_file("two.jsonl",
                             "{\"p_logits\": [0, 1, 2, 3], \"q_logits\": [3, 2, 1, 0]}\n\n"
                             "{\"q_logits\": [0, 0, 0, 0], \"p_logits\": [1.5, -2, 0, 1e3]}\n");
  LogitsReader reader(two.string());
  int count = 0;
  while (auto r = reader.next()) {
    CHECK(r->p_logits.size() == 4);
    ++count;
  }
  CHECK(count == 2);

  const auto ragged = temp_file("ragged.jsonl", "{\"p_logits\": [0, 1], \"q_logits\": [0, 1, 2]}\n");
  LogitsReader bad(ragged.string());
  try {
    bad.next();
    FAIL("expected an input error");
  } catch (const InputError& e) {
    CHECK(e.line() == 1);
    CHECK(std::string(e.what()).find("ragged") != std::string::npos);
  }

  const auto empty = temp_file("empty.jsonl", "");
  CHECK_FALSE(LogitsReader(empty.string()).next().has_value());

  CHECK_THROWS_AS(parse_logits_line("{\"p_logits\": [0, 1]}", 3), InputError);
  CHECK_THROWS_AS(parse_logits_line("{\"p_logits\": [0, \"x\"], \"q_logits\": [0, 1]}", 3), InputError);
  CHECK_THROWS_AS(parse_logits_line("{\"p_logits\": [], \"q_logits\": []}", 3), InputError);
  CHECK_THROWS_AS(parse_logits_line("[1, 2]", 3), InputError);
  CHECK_THROWS_AS(parse_logits_line("{\"p_logits\": [0, 1e999], \"q_logits\": [0, 1]}", 3), InputError);
  CHECK_THROWS_AS(LogitsReader("/nonexistent/file.jsonl"), Error);
}

TEST_CASE("synthetic positions") {
  const SynthSpec zipf = SynthSpec::parse("zipf:1.0");
  CHECK(zipf.kind == SynthKind::Zipf);
  CHECK_FALSE(zipf.shared_draft);
  CHECK(SynthSpec::parse("dirichlet:0.5:shared").shared_draft);
  CHECK_THROWS_AS(SynthSpec::parse("zipf"), Error);
  CHECK_THROWS_AS(SynthSpec::parse("zipf:-1"), Error);
  CHECK_THROWS_AS(SynthSpec::parse("normal:1"), Error);
  CHECK_THROWS_AS(SynthSpec::parse("zipf:1x"), Error);

  const auto a = synth_positions(zipf, 1000, 3, 42);
  const auto b = synth_positions(zipf, 1000, 3, 42);
  REQUIRE(a.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a[i].p_logits == b[i].p_logits);
    CHECK(a[i].q_logits == b[i].q_logits);
    CHECK(a[i].p_logits != a[i].q_logits);
    const Dist p = softmax_temp(a[i].p_logits, 1.0);
    CHECK(p.size() == 1000);
    // Zipf(1) law: the top token carries 1 / H_1000 of the mass.
    double harmonic = 0.0;
    for (int k = 1; k <= 1000; ++k) harmonic += 1.0 / k;
    CHECK(*std::max_element(p.mass().begin(), p.mass().end()) == doctest::Approx(1.0 / harmonic).epsilon(1e-9));
  }
  CHECK(synth_positions(zipf, 1000, 1, 43)[0].p_logits != a[0].p_logits);
  CHECK_THROWS_AS(synth_position(zipf, 1, 0, 0), Error);

  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto r = synth_position(SynthSpec::parse("dirichlet:10000"), 10, seed, 0);
    worst = std::max(worst, tv_distance(softmax_temp(r.p_logits, 1.0), Dist::uniform(10)));
  }
  CHECK(worst < 0.05);
}

TEST_CASE("range parsing and settings") {
  CHECK(parse_range("1:10:1").size() == 10);
  const auto t = parse_range("0.5:1.0:0.1");
  REQUIRE(t.size() == 6);
  CHECK(t[1] == 0.6);
  CHECK(t.back() == 1.0);
  CHECK(parse_range("0.7") == std::vector<double>{0.7});
  CHECK_THROWS_AS(parse_range("1:0:1"), Error);
  CHECK_THROWS_AS(parse_range("1:2:0"), Error);
  CHECK_THROWS_AS(parse_range("a:b:c"), Error);

  ExperimentConfig cfg;
  cfg.synth = SynthSpec::parse("zipf:1");
  CHECK(cfg.temperature == 0.7);
  CHECK(cfg.num_drafts == 3);
  cfg.sweep = SweepAxis::Drafts;
  cfg.sweep_values = {1, 2, 3};
  CHECK(settings_of(cfg).size() == 3);
  cfg.sweep_values = {1.5};
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.sweep = SweepAxis::None;
  cfg.sweep_values.clear();
  cfg.methods = {"magic"};
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("config hash tracks every result-affecting field") {
  ExperimentConfig a;
  a.synth = SynthSpec::parse("zipf:1");
  ExperimentConfig b = a;
  CHECK(a.hash() == b.hash());
  b.threads = 5;
  CHECK(a.hash() == b.hash());
  b.seed = 1;
  CHECK(a.hash() != b.hash());
  ExperimentConfig c = a;
  c.temperature = 0.5;
  CHECK(a.hash() != c.hash());
}

TEST_CASE("hand-built position") {
  ExperimentConfig cfg;
  cfg.input_path = "inline";
  cfg.temperature = 1.0;
  cfg.num_drafts = 2;
  cfg.schemes = {"w", "wo", "greedy"};
  cfg.methods = {"rrs-exact", "kseq-closed", "greedy-closed", "optimal", "rrs"};
  cfg.trials = 1000;
  LogitsRecord rec;
  for (double v : {0.05, 0.05, 0.9}) rec.p_logits.push_back(std::log(v));
  for (double v : {0.5, 0.3, 0.2}) rec.q_logits.push_back(std::log(v));
  const PositionResult r = evaluate_position(cfg, rec, 0);

  const ResultRow* w = find_row(r.rows, "w", "optimal");
  REQUIRE(w);
  CHECK(w->alpha_star == doctest::Approx(0.46).epsilon(1e-9));
  const ResultRow* wo = find_row(r.rows, "wo", "optimal");
  REQUIRE(wo);
  CHECK(wo->alpha_star == doctest::Approx(0.61613).epsilon(1e-5));
  const ResultRow* rrs = find_row(r.rows, "w", "rrs-exact");
  REQUIRE(rrs);
  CHECK(rrs->alpha == doctest::Approx(0.44).epsilon(1e-9));
  CHECK(rrs->gap == doctest::Approx(-0.02).epsilon(1e-9));
  const ResultRow* g = find_row(r.rows, "greedy", "greedy-closed");
  REQUIRE(g);
  CHECK(std::abs(g->gap) <= 1e-9);
  CHECK(find_row(r.rows, "greedy", "rrs") == nullptr);
  CHECK(find_row(r.rows, "wo", "rrs")->trials == 1000);
  CHECK(find_row(r.rows, "wo", "rrs")->mc_seed != 0);
}

TEST_CASE("degenerate shared-draft run reports alpha = alpha* = 1") {
  ExperimentConfig cfg;
  cfg.synth = SynthSpec::parse("zipf:1.0:shared");
  cfg.vocab = 50;
  cfg.positions = 8;
  cfg.trials = 500;
  cfg.schemes = {"w", "wo", "greedy", "spechub"};
  std::ostringstream out;
  const ExperimentSummary s = run_experiment(cfg, out);
  CHECK(s.positions == 8);
  for (const auto& row : s.aggregates) {
    INFO(row.scheme << "/" << row.method);
    CHECK(row.alpha == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(row.alpha_star == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK_FALSE(s.warnings.empty());
}

TEST_CASE("draft-count sweep: optimal iid rate is nondecreasing") {
  ExperimentConfig cfg;
  cfg.synth = SynthSpec::parse("zipf:1.0");
  cfg.vocab = 200;
  cfg.positions = 4;
  cfg.schemes = {"w"};
  cfg.methods = {"optimal"};
  cfg.sweep = SweepAxis::Drafts;
  cfg.sweep_values = parse_range("1:10:1");
  std::ostringstream out;
  const ExperimentSummary s = run_experiment(cfg, out);
  REQUIRE(s.aggregates.size() == 10);
  for (std::size_t k = 1; k < 10; ++k) {
    CHECK(s.aggregates[k].num_drafts == k + 1);
    CHECK(s.aggregates[k].alpha_star >= s.aggregates[k - 1].alpha_star - 1e-12);
  }
}

TEST_CASE("reports are byte-identical and carry hash and seed") {
  ExperimentConfig cfg;
  cfg.synth = SynthSpec::parse("dirichlet:0.3");
  cfg.vocab = 30;
  cfg.positions = 20;
  cfg.trials = 300;
  cfg.seed = 77;
  std::ostringstream a;
  std::ostringstream b;
  cfg.threads = 1;
  run_experiment(cfg, a);
  cfg.threads = 4;
  run_experiment(cfg, b);
  CHECK(a.str() == b.str());

  char hash[20];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(cfg.hash()));
  std::istringstream lines(a.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line.rfind("position,scheme,method,alpha,alpha_star,gap,stderr,seed", 0) == 0);
  int rows = 0;
  while (std::getline(lines, line)) {
    CHECK(line.find(hash) != std::string::npos);
    CHECK(line.find(",77,") != std::string::npos);
    ++rows;
  }
  CHECK(rows > 20);

  cfg.format = ReportFormat::Jsonl;
  std::ostringstream j;
  run_experiment(cfg, j);
  CHECK(j.str().rfind("{\"position\":0,", 0) == 0);
}

TEST_CASE("greedy closed-form gap is structurally zero; no method beats its optimum") {
  ExperimentConfig cfg;
  cfg.synth = SynthSpec::parse("dirichlet:0.2");
  cfg.vocab = 40;
  cfg.positions = 30;
  cfg.trials = 2000;
  cfg.methods = {"rrs", "rrs-exact", "kseq", "kseq-closed", "greedy", "greedy-closed", "optimal"};
  for (std::size_t i = 0; i < cfg.positions; ++i) {
    const PositionResult r = evaluate_position(cfg, synth_position(*cfg.synth, cfg.vocab, cfg.seed, i), i);
    for (const auto& row : r.rows) {
      INFO(row.scheme << "/" << row.method);
      if (row.method == "greedy-closed") CHECK(std::abs(row.gap) <= 1e-9);
      if (row.trials == 0) {
        if (row.scheme != "wo") CHECK(row.gap <= 1e-9);
      } else {
        CHECK(row.gap <= 4.0 * std::max(row.std_error, 1.0 / double(row.trials)));
      }
    }
  }
}

TEST_CASE("empty input produces a header only") {
  ExperimentConfig cfg;
  cfg.input_path = temp_file("empty_run.jsonl", "").string();
  std::ostringstream out;
  const ExperimentSummary s = run_experiment(cfg, out);
  CHECK(s.positions == 0);
  CHECK(s.aggregates.empty());
  CHECK(out.str() == "position,scheme,method,alpha,alpha_star,gap,stderr,seed,temperature,num_drafts,trials,config_hash\n");
  bool warned = false;
  for (const auto& w : s.warnings) warned = warned || w.find("no positions") != std::string::npos;
  CHECK(warned);
}

TEST_CASE("malformed line aborts with its line number") {
  ExperimentConfig cfg;
  cfg.input_path = temp_file("bad_run.jsonl", log_record({0.5, 0.5}, {0.2, 0.8}) + "\n{\"p_logits\": [1]}\n").string();
  std::ostringstream out;
  try {
    run_experiment(cfg, out);
    FAIL("expected an input error");
  } catch (const InputError& e) {
    CHECK(e.line() == 2);
  }
}
