#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "lprisma/embed.hpp"
#include "lprisma/mixture.hpp"
#include "lprisma/records.hpp"
#include "lprisma/screenai.hpp"
#include "lprisma/triage.hpp"

namespace py = pybind11;
using namespace lprisma;

PYBIND11_MODULE(_lprisma, m) {
    m.doc() = "L-PRISMA pre-screening pipeline: similarity scoring, Gaussian mixture "
              "fitting, decision boundaries and triage.";

    py::class_<GmmParams>(m, "GmmParams")
        .def(py::init<>())
        .def_readwrite("K", &GmmParams::K)
        .def_readwrite("weights", &GmmParams::weights)
        .def_readwrite("means", &GmmParams::means)
        .def_readwrite("stddevs", &GmmParams::stddevs)
        .def_readonly("loglik", &GmmParams::loglik)
        .def_readonly("iterations", &GmmParams::iterations)
        .def_readonly("converged", &GmmParams::converged)
        .def_readonly("seed", &GmmParams::seed)
        .def("to_json", [](const GmmParams& p) { return p.to_json().dump(); })
        .def("__repr__", [](const GmmParams& p) {
            return "<GmmParams K=" + std::to_string(p.K) +
                   " loglik=" + std::to_string(p.loglik) + ">";
        });

    py::class_<Cutoffs>(m, "Cutoffs")
        .def_readonly("lower", &Cutoffs::lower)
        .def_readonly("upper", &Cutoffs::upper)
        .def_property_readonly("rule", [](const Cutoffs& c) { return rule_name(c.rule); })
        .def("__repr__", [](const Cutoffs& c) {
            return "<Cutoffs lower=" + std::to_string(c.lower) +
                   " upper=" + std::to_string(c.upper) + ">";
        });

    m.def(
        "fit_em",
        [](const std::vector<double>& scores, std::size_t k, double tol, std::size_t max_iter,
           std::size_t restarts, std::uint64_t seed) {
            FitOptions opts{k, tol, max_iter, restarts, seed};
            return fit_em(scores, opts);
        },
        py::arg("scores"), py::arg("k") = 2, py::arg("tol") = 1e-8, py::arg("max_iter") = 500,
        py::arg("restarts") = 1, py::arg("seed") = 0,
        "Fit a 1-D Gaussian mixture to scores with EM.");

    m.def("pdf_eval", &pdf_eval, py::arg("params"), py::arg("s"));
    m.def("responsibilities", &responsibilities, py::arg("params"), py::arg("s"));
    m.def("sample", &sample, py::arg("params"), py::arg("n"), py::arg("seed"));
    m.def(
        "histogram",
        [](const std::vector<double>& scores, std::size_t bins) {
            Histogram h = histogram(scores, bins);
            return py::make_tuple(h.edges, h.counts);
        },
        py::arg("scores"), py::arg("bins"));
    m.def(
        "derive_cutoffs",
        [](const GmmParams& params, const std::vector<double>& scores, const std::string& rule) {
            return derive_cutoffs(params, scores, parse_rule_spec(rule));
        },
        py::arg("params"), py::arg("scores"), py::arg("rule") = "two-sigma");

    m.def(
        "embed_text",
        [](const std::string& text, std::size_t dim, std::uint64_t seed) {
            return embed_builtin(text, dim, seed).values;
        },
        py::arg("text"), py::arg("dim") = 256, py::arg("seed") = 0,
        "Deterministic builtin feature-hash embedding.");
    m.def(
        "cosine_similarity",
        [](const std::vector<double>& a, const std::vector<double>& b) {
            EmbeddingVector va{a, a.size(), false};
            EmbeddingVector vb{b, b.size(), false};
            return cosine(va, vb);
        },
        py::arg("a"), py::arg("b"));
    m.def(
        "map_score",
        [](double c, const std::string& mapping) { return map_score(c, parse_mapping_name(mapping)); },
        py::arg("cosine"), py::arg("mapping") = "affine");

    m.def("normalize_title", &normalize_title, py::arg("title"));
    m.def("normalize_doi", &normalize_doi, py::arg("doi"));

    m.def(
        "partition",
        [](const std::vector<std::pair<std::string, double>>& scored, const Cutoffs& cutoffs) {
            std::vector<SimilarityScore> scores;
            for (const auto& [id, s] : scored) scores.push_back({id, 0.0, s, "python"});
            TriageResult result = partition(scores, cutoffs);
            py::dict out;
            for (const auto& [id, bin] : result.assignments)
                out[py::str(id)] = bin_name(bin);
            return out;
        },
        py::arg("scores"), py::arg("cutoffs"),
        "Partition (record_id, s) pairs into triage bins.");

    m.def(
        "parse_verdict",
        [](const std::string& raw) {
            ParsedVerdict v = parse_verdict(raw);
            py::dict out;
            out["decision"] = decision_name(v.decision);
            out["rationale"] = v.rationale;
            out["summary"] = v.summary ? py::object(py::str(*v.summary)) : py::none();
            return out;
        },
        py::arg("raw"));

    m.attr("__version__") = "0.1.0";
}
