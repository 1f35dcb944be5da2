#include <json.hpp>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "pacvd/digest.hpp"
#include "pacvd/errors.hpp"
#include "pacvd/eval.hpp"

namespace pacvd {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Write to a sibling temporary and rename so readers never observe partial files.
void write_atomic(const fs::path& p, const std::string& data) {
    const fs::path tmp = p.string() + ".tmp" +
                         std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out << data;
    }
    fs::rename(tmp, p);
}

ExemplarStore make_store(const std::vector<SampleRecord>& samples,
                         const std::vector<ContextResult>& contexts) {
    ExemplarStore store;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        Exemplar e;
        e.id = samples[i].id;
        e.code = samples[i].target_code;
        e.api_text = contexts[i].text;
        e.vulnerable = samples[i].vulnerable;
        store.add(std::move(e));
    }
    // vulnerable/safe versions of the same function under one CVE form a before/after pair
    std::map<std::pair<std::string, std::string>, std::pair<const SampleRecord*, const SampleRecord*>>
        groups;
    for (const auto& s : samples) {
        if (!s.cve) continue;
        auto& g = groups[{*s.cve, s.target_name}];
        auto& slot = s.vulnerable ? g.first : g.second;
        if (!slot || s.id < slot->id) slot = &s;
    }
    for (const auto& [key, g] : groups) {
        if (!g.first || !g.second) continue;
        Exemplar e;
        e.id = "pair:" + g.first->id + "|" + g.second->id;
        e.vulnerable = true;
        e.before_fix = g.first->target_code;
        e.after_fix = g.second->target_code;
        e.related_ids = {g.first->id, g.second->id};
        store.add(std::move(e));
    }
    return store;
}

ordered_json confusion_json(const ConfusionMatrix& c) {
    return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}, {"unparseable", c.unparseable}};
}

ordered_json metrics_json(const Metrics& m) {
    return {{"accuracy", m.accuracy},
            {"precision", m.precision},
            {"recall", m.recall},
            {"f1", m.f1},
            {"mcc", m.mcc}};
}

}  // namespace

std::uint64_t sample_seed(std::uint64_t seed, std::string_view sample_id) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : sample_id) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::uint64_t z = seed ^ h;
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

EvalRun run_grid(const std::vector<SampleRecord>& samples, const ApiCatalog& catalog,
                 Gateway& gateway, const GridOptions& options) {
    if (options.contexts.empty() || options.strategies.empty())
        throw EmptyInput("evaluation grid has no contexts or no strategies");
    if (samples.empty()) throw EmptyInput("dataset is empty");

    EvalRun run;
    run.provider_id = gateway.provider_id();
    run.seed = options.seed;
    run.samples = samples.size();

    fs::path verdict_dir;
    if (!options.out_dir.empty()) {
        verdict_dir = fs::path(options.out_dir) / "verdicts";
        fs::create_directories(verdict_dir);
    }

    for (const auto& ctx : options.contexts) {
        std::vector<ContextResult> contexts;
        for (const auto& s : samples)
            contexts.push_back(build_context(s, ctx, catalog, sample_seed(options.seed, s.id),
                                             options.context));
        const ExemplarStore store = make_store(samples, contexts);

        for (const auto strategy : options.strategies) {
            CellReport cell;
            cell.context = ctx;
            cell.strategy = strategy;
            std::vector<VerdictLabel> labels(samples.size(), VerdictLabel::Unparseable);
            std::vector<std::string> errors(samples.size());
            std::atomic<std::size_t> next{0}, hits{0}, sent{0};

            const auto work = [&] {
                for (std::size_t i = next++; i < samples.size(); i = next++) {
                    const SampleRecord& s = samples[i];
                    try {
                        PromptOptions po;
                        po.exemplar_count = options.exemplar_count;
                        po.seed = sample_seed(options.seed, s.id);
                        po.sample_id = s.id;
                        const PromptBundle bundle =
                            build_prompt(strategy, s.target_code, contexts[i].text, store, po);
                        for (const auto& id : bundle.exemplars) {
                            const Exemplar* e = store.find(id);
                            if (id == s.id || std::find(e->related_ids.begin(), e->related_ids.end(),
                                                        s.id) != e->related_ids.end())
                                throw std::logic_error("exemplar " + id + " leaks sample " + s.id);
                        }
                        const std::string hash = prompt_hash(bundle);
                        const std::string key = sha256_hex(s.id + '\0' + to_string(ctx) + '\0' +
                                                           std::string(to_string(strategy)) + '\0' +
                                                           run.provider_id + '\0' + hash);
                        const fs::path file =
                            verdict_dir.empty() ? fs::path() : verdict_dir / (key + ".json");
                        Verdict v;
                        if (options.resume && !file.empty() && fs::exists(file)) {
                            v = transcript_from_json(read_file(file));
                            ++hits;
                        } else {
                            v = gateway.complete(bundle);
                            ++sent;
                            if (!file.empty()) {
                                ordered_json j;
                                j["sample"] = s.id;
                                j["context"] = to_string(ctx);
                                j["strategy"] = std::string(to_string(strategy));
                                j["prompt_hash"] = hash;
                                const auto t = ordered_json::parse(transcript_to_json(v));
                                for (const auto& [k, val] : t.items()) j[k] = val;
                                write_atomic(file, j.dump(2) + "\n");
                            }
                        }
                        labels[i] = v.label;
                    } catch (const std::exception& e) {
                        errors[i] = e.what();
                    }
                }
            };
            const std::size_t workers =
                std::max<std::size_t>(1, std::min(options.concurrency, samples.size()));
            {
                std::vector<std::jthread> pool;
                for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
                work();
            }
            cell.cache_hits = hits;
            cell.dispatched = sent;

            for (std::size_t i = 0; i < samples.size(); ++i) {
                cell.degraded += samples[i].degraded;
                cell.flagged_contexts += contexts[i].flagged;
                if (!errors[i].empty() && cell.error.empty())
                    cell.error = "sample " + samples[i].id + ": " + errors[i];
            }
            if (cell.error.empty()) {
                for (std::size_t i = 0; i < samples.size(); ++i) {
                    cell.overall.confusion.add(samples[i].vulnerable, labels[i]);
                    cell.per_cwe[samples[i].cwe.value_or("unlabeled")].confusion.add(
                        samples[i].vulnerable, labels[i]);
                }
                cell.overall.metrics = compute_metrics(cell.overall.confusion);
                for (auto& [cwe, r] : cell.per_cwe) r.metrics = compute_metrics(r.confusion);
            }
            run.cells.push_back(std::move(cell));
        }
    }

    if (!options.out_dir.empty()) {
        write_atomic(fs::path(options.out_dir) / "run.json", run_to_json(run));
        write_atomic(fs::path(options.out_dir) / "table.txt", format_table(run));
    }
    return run;
}

std::string run_to_json(const EvalRun& run) {
    ordered_json j;
    j["provider"] = run.provider_id;
    j["seed"] = run.seed;
    j["samples"] = run.samples;
    ordered_json cells = ordered_json::array();
    for (const auto& c : run.cells) {
        ordered_json cj;
        cj["context"] = to_string(c.context);
        cj["strategy"] = std::string(to_string(c.strategy));
        cj["status"] = c.error.empty() ? "ok" : "error";
        if (!c.error.empty()) {
            cj["error"] = c.error;
        } else {
            cj["confusion"] = confusion_json(c.overall.confusion);
            cj["metrics"] = metrics_json(c.overall.metrics);
            ordered_json per = ordered_json::object();
            for (const auto& [cwe, r] : c.per_cwe)
                per[cwe] = {{"confusion", confusion_json(r.confusion)},
                            {"metrics", metrics_json(r.metrics)}};
            cj["per_cwe"] = std::move(per);
        }
        cj["degraded"] = c.degraded;
        cj["flagged_contexts"] = c.flagged_contexts;
        cells.push_back(std::move(cj));
    }
    j["cells"] = std::move(cells);
    return j.dump(2) + "\n";
}

std::string format_table(const EvalRun& run) {
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-12s %-21s %9s %10s %8s %8s %8s %12s\n", "context",
                  "strategy", "accuracy", "precision", "recall", "f1", "mcc", "unparseable");
    out += buf;
    for (const auto& c : run.cells) {
        const std::string ctx = to_string(c.context);
        const std::string strat(to_string(c.strategy));
        if (!c.error.empty()) {
            std::snprintf(buf, sizeof buf, "%-12s %-21s ", ctx.c_str(), strat.c_str());
            out += buf + ("error: " + c.error) + "\n";
            continue;
        }
        const Metrics& m = c.overall.metrics;
        std::snprintf(buf, sizeof buf, "%-12s %-21s %9.2f %10.2f %8.2f %8.2f %8.2f %12zu\n",
                      ctx.c_str(), strat.c_str(), 100 * m.accuracy, 100 * m.precision,
                      100 * m.recall, 100 * m.f1, 100 * m.mcc, c.overall.confusion.unparseable);
        out += buf;
    }
    return out;
}

}  // namespace pacvd
