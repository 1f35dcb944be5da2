#include "pacvd/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "pacvd/abstraction.hpp"
#include "pacvd/catalog.hpp"
#include "pacvd/errors.hpp"
#include "pacvd/eval.hpp"
#include "pacvd/gateway.hpp"
#include "pacvd/prompt.hpp"

namespace pacvd {

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_output(const std::string& path, const std::string& data, std::ostream& out) {
    if (path.empty()) {
        out << data;
        return;
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write " + path);
    f << data;
}

std::vector<SourceUnit> load_units(const std::vector<std::string>& paths) {
    std::vector<SourceUnit> units;
    for (const auto& p : paths) {
        try {
            units.push_back(parse_unit(p, read_file(p)));
        } catch (const ParseError& e) {
            throw Error(p + ":" + std::to_string(e.line()) + ":" + std::to_string(e.column()) +
                        ": " + e.what());
        } catch (const EncodingError& e) {
            throw Error(p + ": " + e.what());
        }
    }
    return units;
}

ApiCatalog load_catalog_option(const std::string& path) {
    if (path.empty()) return default_catalog();
    try {
        return load_catalog(read_file(path));
    } catch (const SchemaError& e) {
        throw Error(path + ": " + e.what());
    }
}

ProviderConfig load_config_option(const std::string& path) {
    std::string p = path;
    if (p.empty())
        if (const char* env = std::getenv("PACVD_CONFIG"); env && *env) p = env;
    return p.empty() ? ProviderConfig{} : load_provider_config(p);
}

std::string target_code(const std::vector<SourceUnit>& units, const std::string& target) {
    const FunctionAst* found = nullptr;
    const SourceUnit* owner = nullptr;
    std::size_t count = 0;
    for (const auto& u : units)
        if (const auto* f = u.find(target)) {
            found = f;
            owner = &u;
            ++count;
        }
    if (!found) throw RootNotFound(target);
    if (count > 1) throw AmbiguousRoot(target, count);
    return owner->text.substr(found->span.begin, found->span.end - found->span.begin);
}

const std::map<std::string, AbstractionLevel> kLevels{{"A1", AbstractionLevel::A1},
                                                      {"A2", AbstractionLevel::A2},
                                                      {"A3", AbstractionLevel::A3},
                                                      {"A4", AbstractionLevel::A4}};

std::map<std::string, PromptStrategy> strategy_map() {
    std::map<std::string, PromptStrategy> m;
    for (auto s : kAllStrategies) m.emplace(std::string(to_string(s)), s);
    return m;
}

// Options shared by prompt and detect.
struct PromptArgs {
    std::vector<std::string> files;
    std::string target;
    std::string level = "A3";
    int depth = 3;
    std::string catalog;
    std::string strategy = "basic";
    std::string exemplars;
    std::uint64_t seed = 0;
    std::size_t k = 2;
};

void add_prompt_options(CLI::App* cmd, PromptArgs& a) {
    cmd->add_option("files", a.files, "C source files")->required()->check(CLI::ExistingFile);
    cmd->add_option("--target", a.target, "Function under analysis")->required();
    cmd->add_option("--level", a.level, "Abstraction level appended to the code, or none")
        ->capture_default_str()
        ->transform(CLI::IsMember({"A1", "A2", "A3", "A4", "none"}, CLI::ignore_case));
    cmd->add_option("--depth", a.depth, "Call depth limit")->capture_default_str()->check(CLI::Range(1, 64));
    cmd->add_option("--catalog", a.catalog, "Primitive API catalog file")->check(CLI::ExistingFile);
    cmd->add_option("--strategy", a.strategy, "Prompt strategy")
        ->capture_default_str()
        ->check(CLI::IsMember(strategy_map()));
    cmd->add_option("--exemplars", a.exemplars, "Exemplar store (JSON lines) for few-shot strategies")
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", a.seed, "Exemplar selection seed")->capture_default_str();
    cmd->add_option("--k", a.k, "Number of few-shot exemplars")->capture_default_str()->check(CLI::Range(1, 16));
}

PromptBundle make_bundle(const PromptArgs& a) {
    const auto units = load_units(a.files);
    const std::string code = target_code(units, a.target);
    std::string api;
    if (a.level != "none") {
        AbstractionOptions o;
        o.level = kLevels.at(a.level);
        o.depth_limit = a.depth;
        api = abstract(a.target, units, load_catalog_option(a.catalog), o).rendered;
    }
    const ExemplarStore store =
        a.exemplars.empty() ? ExemplarStore{} : ExemplarStore::from_jsonl(read_file(a.exemplars));
    PromptOptions po;
    po.exemplar_count = a.k;
    po.seed = a.seed;
    return build_prompt(*parse_strategy(a.strategy), code, api, store, po);
}

std::string bundle_text(const PromptBundle& b) {
    std::string out;
    for (const auto& t : b.turns) {
        out += "=== " + std::string(to_string(t.role)) + " ===\n";
        out += t.role == TurnRole::AssistantPlaceholder ? std::string("(model reply)") : t.text;
        out += "\n";
    }
    return out;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s + ",") {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else if (c != ' ') {
            cur += c;
        }
    }
    return out;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app("Primitive-API context abstraction and LLM vulnerability detection toolkit.",
                 "pacvd");
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Print help for every subcommand");

    // catalog
    std::string cat_file;
    bool cat_lint = false;
    auto* cat = app.add_subcommand("catalog", "Print the primitive API catalog");
    cat->add_option("--catalog", cat_file, "Catalog file (default: built-in)")->check(CLI::ExistingFile);
    cat->add_flag("--lint", cat_lint, "Report release APIs without an acquire partner");

    // abstract
    std::vector<std::string> abs_files;
    std::string abs_target, abs_level = "A3", abs_catalog, abs_format = "text", abs_out;
    int abs_depth = 3;
    bool abs_fuzzy = false;
    std::size_t abs_cap = 4096;
    auto* abs = app.add_subcommand("abstract", "Summarize primitive API usage of a target's callees");
    abs->add_option("files", abs_files, "C source files")->required()->check(CLI::ExistingFile);
    abs->add_option("--target", abs_target, "Function under analysis")->required();
    abs->add_option("--level", abs_level, "Abstraction level")
        ->capture_default_str()
        ->transform(CLI::IsMember({"A1", "A2", "A3", "A4"}, CLI::ignore_case));
    abs->add_option("--depth", abs_depth, "Call depth limit")->capture_default_str()->check(CLI::Range(1, 64));
    abs->add_option("--catalog", abs_catalog, "Primitive API catalog file")->check(CLI::ExistingFile);
    abs->add_option("--format", abs_format, "Output format")
        ->capture_default_str()
        ->check(CLI::IsMember({"text", "json"}));
    abs->add_option("--out", abs_out, "Output file (default: stdout)");
    abs->add_flag("--include-fuzzy-at-a2", abs_fuzzy, "Also print the all/some/no-branch section at A2-A4");
    abs->add_option("--path-cap", abs_cap, "Path enumeration cap before exact fallback")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);

    // prompt
    PromptArgs pr;
    std::string pr_format = "text", pr_out;
    auto* prm = app.add_subcommand("prompt", "Build and print a detection prompt without sending it");
    add_prompt_options(prm, pr);
    prm->add_option("--format", pr_format, "Output format")
        ->capture_default_str()
        ->check(CLI::IsMember({"text", "json"}));
    prm->add_option("--out", pr_out, "Output file (default: stdout)");

    // detect
    PromptArgs dt;
    std::string dt_provider = "http", dt_config, dt_transcript;
    auto* det = app.add_subcommand("detect", "Ask a model whether the target is vulnerable");
    add_prompt_options(det, dt);
    det->add_option("--provider", dt_provider, "http, or mock:<script.json>")->capture_default_str();
    det->add_option("--provider-config", dt_config, "Provider config JSON (default: $PACVD_CONFIG)")
        ->check(CLI::ExistingFile);
    det->add_option("--transcript", dt_transcript, "Write the dialogue transcript to this file");

    // eval
    std::string ev_dataset, ev_levels = "A3", ev_strategies = "basic", ev_provider = "http",
                            ev_config, ev_out, ev_catalog;
    std::uint64_t ev_seed = 0;
    bool ev_resume = false;
    std::size_t ev_conc = 4, ev_k = 2;
    int ev_depth = 3;
    auto* ev = app.add_subcommand("eval", "Run a context x strategy grid over a dataset");
    ev->add_option("--dataset", ev_dataset, "Dataset (JSON lines)")->required()->check(CLI::ExistingFile);
    ev->add_option("--levels", ev_levels,
                   "Comma list of contexts: A1-A4, none, all-callees, api-guided, similarity, "
                   "random, hierarchy")
        ->capture_default_str();
    ev->add_option("--strategies", ev_strategies, "Comma list of prompt strategies")->capture_default_str();
    ev->add_option("--provider", ev_provider, "http, or mock:<script.json>")->capture_default_str();
    ev->add_option("--provider-config", ev_config, "Provider config JSON (default: $PACVD_CONFIG)")
        ->check(CLI::ExistingFile);
    ev->add_option("--seed", ev_seed, "Sampling and exemplar seed")->capture_default_str();
    ev->add_option("--out", ev_out, "Run directory")->required();
    ev->add_flag("--resume", ev_resume, "Reuse cached verdicts in the run directory");
    ev->add_option("--concurrency", ev_conc, "Samples evaluated in parallel")
        ->capture_default_str()
        ->check(CLI::Range(1, 256));
    ev->add_option("--k", ev_k, "Number of few-shot exemplars")->capture_default_str()->check(CLI::Range(1, 16));
    ev->add_option("--depth", ev_depth, "Call depth limit")->capture_default_str()->check(CLI::Range(1, 64));
    ev->add_option("--catalog", ev_catalog, "Primitive API catalog file")->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        const CLI::App* scope = &app;
        for (const auto* sub : app.get_subcommands()) scope = sub;
        err << scope->help();
        return 2;
    }

    std::vector<ContextStrategy> contexts;
    std::vector<PromptStrategy> strategies;
    if (*ev) {
        for (const auto& s : split_list(ev_levels)) {
            const auto c = parse_context_strategy(s);
            if (!c) {
                err << "--levels: unknown context '" << s << "'\n" << ev->help();
                return 2;
            }
            contexts.push_back(*c);
        }
        for (const auto& s : split_list(ev_strategies)) {
            const auto p = parse_strategy(s);
            if (!p) {
                err << "--strategies: unknown strategy '" << s << "'\n" << ev->help();
                return 2;
            }
            strategies.push_back(*p);
        }
    }

    try {
        if (*cat) {
            const ApiCatalog c = load_catalog_option(cat_file);
            out << serialize_catalog(c);
            if (cat_lint)
                for (const auto& w : lint(c)) err << "warning: " << w << "\n";
        } else if (*abs) {
            const auto units = load_units(abs_files);
            AbstractionOptions o;
            o.level = kLevels.at(abs_level);
            o.depth_limit = abs_depth;
            o.include_fuzzy_at_a2 = abs_fuzzy;
            o.path_cap = abs_cap;
            const auto report = abstract(abs_target, units, load_catalog_option(abs_catalog), o);
            write_output(abs_out, abs_format == "json" ? report_to_json(report) : report.rendered, out);
        } else if (*prm) {
            const PromptBundle b = make_bundle(pr);
            if (pr_format == "json") write_output(pr_out, bundle_to_json(b), out);
            else write_output(pr_out, bundle_text(b) + "prompt-hash: " + prompt_hash(b) + "\n", out);
        } else if (*det) {
            const PromptBundle b = make_bundle(dt);
            const ProviderConfig config = load_config_option(dt_config);
            Gateway gw(config, make_provider(dt_provider, config));
            const Verdict v = gw.complete(b);
            out << "verdict: " << to_string(v.label) << "\n";
            out << "prompt-hash: " << prompt_hash(b) << "\n";
            if (!dt_transcript.empty()) write_output(dt_transcript, transcript_to_json(v), out);
        } else if (*ev) {
            const auto samples = load_dataset(ev_dataset);
            const ProviderConfig config = load_config_option(ev_config);
            Gateway gw(config, make_provider(ev_provider, config));
            GridOptions g;
            g.contexts = contexts;
            g.strategies = strategies;
            g.seed = ev_seed;
            g.out_dir = ev_out;
            g.resume = ev_resume;
            g.concurrency = ev_conc;
            g.exemplar_count = ev_k;
            g.context.depth_limit = ev_depth;
            const EvalRun run = run_grid(samples, load_catalog_option(ev_catalog), gw, g);
            out << format_table(run);
            std::size_t sent = 0, hits = 0, failed = 0;
            for (const auto& c : run.cells) {
                sent += c.dispatched;
                hits += c.cache_hits;
                failed += !c.error.empty();
            }
            err << "cells: " << run.cells.size() << ", failed: " << failed
                << ", dispatched: " << sent << ", cache hits: " << hits << "\n";
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace pacvd
