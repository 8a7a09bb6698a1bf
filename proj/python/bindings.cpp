#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mdsd/alpha.hpp"
#include "mdsd/exact.hpp"
#include "mdsd/experiment.hpp"
#include "mdsd/montecarlo.hpp"
#include "mdsd/verify.hpp"

namespace py = pybind11;
using namespace mdsd;

namespace {

DraftScheme make_scheme(const std::string& name, const std::vector<double>& q, std::size_t n) {
  Dist d(q);
  if (name == "w") return DraftScheme::with_replacement(std::move(d), n);
  if (name == "wo") return DraftScheme::without_replacement(std::move(d), n);
  if (name == "greedy") return DraftScheme::greedy(std::move(d), n);
  if (name == "spechub") {
    if (n != 2) throw Error("spechub scheme requires n = 2");
    return DraftScheme::spechub(std::move(d));
  }
  throw Error("unknown scheme: " + name);
}

SchemeKind scheme_kind(const std::string& name) {
  if (name == "w") return SchemeKind::WithReplacement;
  if (name == "wo") return SchemeKind::WithoutReplacement;
  if (name == "greedy") return SchemeKind::Greedy;
  if (name == "spechub") return SchemeKind::SpecHub;
  throw Error("unknown scheme: " + name);
}

Method method_of(const std::string& name) {
  if (name == "ot") return Method::OtSingle;
  if (name == "rrs-w") return Method::RrsWith;
  if (name == "rrs-wo") return Method::RrsWithout;
  if (name == "kseq") return Method::Kseq;
  if (name == "greedy") return Method::Greedy;
  throw Error("unknown verifier: " + name);
}

py::object to_fraction(const exact::Rational& r) {
  static py::object fraction = py::module_::import("fractions").attr("Fraction");
  return fraction(py::int_(py::str(r.get_num().get_str())), py::int_(py::str(r.get_den().get_str())));
}

py::dict row_dict(const ResultRow& r) {
  py::dict d;
  d["position"] = r.position;
  d["scheme"] = r.scheme;
  d["method"] = r.method;
  d["alpha"] = r.alpha;
  d["alpha_star"] = r.alpha_star;
  d["gap"] = r.gap;
  d["stderr"] = r.std_error;
  d["temperature"] = r.temperature;
  d["num_drafts"] = r.num_drafts;
  d["trials"] = r.trials;
  d["mc_seed"] = r.mc_seed;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Optimal acceptance rates and verifiers for multi-draft speculative sampling";
  py::register_exception<Error>(m, "MdsdError", PyExc_ValueError);

  m.def("softmax", [](const std::vector<double>& logits, double temperature) {
    return softmax_temp(logits, temperature).vector();
  }, py::arg("logits"), py::arg("temperature") = 1.0);

  m.def("alpha_single_draft", [](const std::vector<double>& p, const std::vector<double>& q) {
    return alpha_single_draft(Dist(p), Dist(q));
  }, py::arg("p"), py::arg("q"));

  m.def("alpha_star", [](const std::vector<double>& p, const std::vector<double>& q, std::size_t n,
                         const std::string& scheme) {
    return alpha_scan(Dist(p), make_scheme(scheme, q, n)).alpha_star;
  }, py::arg("p"), py::arg("q"), py::arg("n"), py::arg("scheme") = "w",
     "Optimal acceptance rate for n drafts under scheme 'w', 'wo', 'greedy' or 'spechub'.");

  m.def("scan", [](const std::vector<double>& p, const std::vector<double>& q, std::size_t n,
                   const std::string& scheme) {
    const ScanResult r = alpha_scan(Dist(p), make_scheme(scheme, q, n));
    py::dict d;
    d["alpha_star"] = r.alpha_star;
    d["min_f"] = r.min_f;
    d["argmin_prefix_len"] = r.argmin_prefix_len;
    d["ordering"] = r.ordering;
    return d;
  }, py::arg("p"), py::arg("q"), py::arg("n"), py::arg("scheme") = "w");

  m.def("alpha_greedy_closed", [](const std::vector<double>& p, const std::vector<double>& q, std::size_t n) {
    return alpha_greedy_closed(Dist(p), Dist(q), n);
  }, py::arg("p"), py::arg("q"), py::arg("n"));

  m.def("alpha_exact", [](const std::vector<long>& p_counts, const std::vector<long>& q_counts, std::size_t n,
                          const std::string& scheme) {
    const exact::ExactScheme s{scheme_kind(scheme), {exact::RationalDist::from_counts(q_counts)}, n};
    return to_fraction(exact::alpha_maxflow(exact::RationalDist::from_counts(p_counts), s));
  }, py::arg("p_counts"), py::arg("q_counts"), py::arg("n"), py::arg("scheme") = "w",
     "Exact max-flow rate for distributions given as nonnegative integer weights; returns a Fraction.");

  m.def("kseq_solve", [](const std::vector<double>& p, const std::vector<double>& q, std::size_t n) {
    const KseqParams k = kseq_solve(Dist(p), Dist(q), n);
    py::dict d;
    d["rho"] = k.rho;
    d["beta"] = k.beta_at_rho;
    d["alpha"] = k.alpha_closed;
    d["residual"] = k.residual;
    return d;
  }, py::arg("p"), py::arg("q"), py::arg("n"));

  m.def("rrs_w_rate", [](const std::vector<double>& p, const std::vector<double>& q, std::size_t n) {
    return rrs_w_rate_exact(Dist(p), Dist(q), n);
  }, py::arg("p"), py::arg("q"), py::arg("n"));

  m.def("estimate_alpha", [](const std::vector<double>& p, const std::vector<double>& q, std::size_t n,
                             const std::string& scheme, const std::string& verifier, std::uint64_t trials,
                             std::uint64_t seed, unsigned threads) {
    const Dist target(p);
    const DraftScheme s = make_scheme(scheme, q, n);
    McReport r;
    {
      py::gil_scoped_release release;
      r = estimate_alpha(target, s, method_of(verifier), trials, seed, threads);
    }
    py::dict d;
    d["trials"] = r.trials;
    d["accepted"] = r.accepted;
    d["alpha"] = r.acceptance_mean;
    d["stderr"] = r.acceptance_stderr;
    d["marginal"] = r.empirical_marginal;
    d["tv_to_target"] = r.tv_to_target;
    return d;
  }, py::arg("p"), py::arg("q"), py::arg("n"), py::arg("scheme"), py::arg("verifier"), py::arg("trials"),
     py::arg("seed") = 0, py::arg("threads") = 0,
     "Monte Carlo acceptance rate; verifier is 'ot', 'rrs-w', 'rrs-wo', 'kseq' or 'greedy'.");

  m.def("evaluate_position", [](const std::vector<double>& p_logits, const std::vector<double>& q_logits,
                                double temperature, std::size_t num_drafts, const std::vector<std::string>& schemes,
                                const std::vector<std::string>& methods, std::uint64_t trials, std::uint64_t seed) {
    ExperimentConfig cfg;
    cfg.input_path = "<python>";
    cfg.temperature = temperature;
    cfg.num_drafts = num_drafts;
    cfg.schemes = schemes;
    cfg.methods = methods;
    cfg.trials = trials;
    cfg.seed = seed;
    cfg.validate();
    const PositionResult r = evaluate_position(cfg, LogitsRecord{p_logits, q_logits}, 0);
    py::list rows;
    for (const ResultRow& row : r.rows) rows.append(row_dict(row));
    return py::make_tuple(rows, r.warnings);
  }, py::arg("p_logits"), py::arg("q_logits"), py::arg("temperature") = 0.7, py::arg("num_drafts") = 3,
     py::arg("schemes") = std::vector<std::string>{"w", "wo", "greedy"},
     py::arg("methods") = std::vector<std::string>{"rrs-exact", "kseq-closed", "greedy-closed", "optimal"},
     py::arg("trials") = 10000, py::arg("seed") = 0,
     "Report rows for one position; returns (rows, warnings).");
}
