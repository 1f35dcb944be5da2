#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "pacvd/abstraction.hpp"
#include "pacvd/catalog.hpp"
#include "pacvd/cli.hpp"
#include "pacvd/errors.hpp"
#include "pacvd/eval.hpp"
#include "pacvd/frontend.hpp"
#include "pacvd/gateway.hpp"
#include "pacvd/prompt.hpp"

namespace py = pybind11;
using namespace pacvd;

namespace {

ApiCatalog catalog_from(const std::optional<std::string>& text) {
    return text ? load_catalog(*text) : default_catalog();
}

AbstractionLevel level_from(const std::string& text) {
    const auto l = parse_level(text);
    if (!l) throw py::value_error("unknown abstraction level: " + text);
    return *l;
}

PromptStrategy strategy_from(const std::string& text) {
    const auto s = parse_strategy(text);
    if (!s) throw py::value_error("unknown prompt strategy: " + text);
    return *s;
}

}  // namespace

PYBIND11_MODULE(_pacvd, m) {
    m.doc() = "Primitive-API context abstraction and prompt construction.";

    // translators run newest first, so subclasses are registered after the base
    auto& error = py::register_exception<Error>(m, "Error");
    py::register_exception<ParseError>(m, "ParseError", error.ptr());
    py::register_exception<SchemaError>(m, "SchemaError", error.ptr());

    m.def(
        "abstract_json",
        [](const std::vector<std::pair<std::string, std::string>>& sources, const std::string& target,
           const std::string& level, int depth, bool include_fuzzy_at_a2,
           const std::optional<std::string>& catalog) {
            std::vector<SourceUnit> units;
            for (const auto& [path, text] : sources) units.push_back(parse_unit(path, text));
            AbstractionOptions o;
            o.level = level_from(level);
            o.depth_limit = depth;
            o.include_fuzzy_at_a2 = include_fuzzy_at_a2;
            const auto report = abstract(target, units, catalog_from(catalog), o);
            return py::make_tuple(report.rendered, report_to_json(report));
        },
        py::arg("sources"), py::arg("target"), py::arg("level") = "A3", py::arg("depth") = 3,
        py::arg("include_fuzzy_at_a2") = false, py::arg("catalog") = py::none(),
        "Rendered text and JSON report for (path, text) sources.");

    m.def("default_catalog", [] { return serialize_catalog(default_catalog()); },
          "Built-in primitive API catalog document.");

    m.def(
        "build_prompt_json",
        [](const std::string& strategy, const std::string& code, const std::string& api_text,
           const std::string& exemplars, std::size_t k, std::uint64_t seed) {
            const auto store = ExemplarStore::from_jsonl(exemplars);
            PromptOptions o;
            o.exemplar_count = k;
            o.seed = seed;
            const auto b = build_prompt(strategy_from(strategy), code, api_text, store, o);
            return py::make_tuple(bundle_to_json(b), prompt_hash(b));
        },
        py::arg("strategy"), py::arg("code"), py::arg("api_text") = "", py::arg("exemplars") = "",
        py::arg("k") = 2, py::arg("seed") = 0, "Prompt bundle JSON and its hash.");

    m.def("strategies", [] {
        std::vector<std::string> out;
        for (auto s : kAllStrategies) out.emplace_back(to_string(s));
        return out;
    });

    m.def("parse_verdict", [](const std::string& text) { return std::string(to_string(parse_verdict(text))); },
          py::arg("text"), "yes, no or unparseable.");

    m.def(
        "compute_metrics",
        [](std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
            ConfusionMatrix c;
            c.tp = tp;
            c.fp = fp;
            c.fn = fn;
            c.tn = tn;
            const auto r = compute_metrics(c);
            py::dict d;
            d["accuracy"] = r.accuracy;
            d["precision"] = r.precision;
            d["recall"] = r.recall;
            d["f1"] = r.f1;
            d["mcc"] = r.mcc;
            return d;
        },
        py::arg("tp"), py::arg("fp"), py::arg("fn"), py::arg("tn"));

    m.def("jaccard", &jaccard, py::arg("a"), py::arg("b"));
    m.def("levenshtein", [](const std::string& a, const std::string& b) { return levenshtein(a, b); });
    m.def("code_tokens", &code_tokens, py::arg("code"));

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::vector<const char*> argv{"pacvd"};
            for (const auto& a : args) argv.push_back(a.c_str());
            std::ostringstream out, err;
            int rc;
            {
                py::gil_scoped_release release;
                rc = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
            }
            return py::make_tuple(rc, out.str(), err.str());
        },
        py::arg("args"), "Runs the command line in-process; returns (exit code, stdout, stderr).");
}
