#include "murgat/commands.hpp"

#include "murgat/digest.hpp"
#include "murgat/generation.hpp"
#include "murgat/io_util.hpp"
#include "murgat/meta_eval.hpp"
#include "murgat/pipeline.hpp"
#include "murgat/programs.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace murgat::cli {

namespace {

constexpr const char* kVersion = "0.1.0";

RunConfig apply_overrides(RunConfig cfg, const GlobalOptions& opts) {
    if (opts.concurrency) cfg.concurrency = *opts.concurrency;
    if (opts.cache_dir) cfg.cache_dir = *opts.cache_dir;
    if (!opts.mock_script.empty()) {
        cfg.mock_script = opts.mock_script;
        for (auto& [name, judge] : cfg.backends) judge.backend_id = "mock";
    }
    return cfg;
}

struct Engine {
    RunConfig cfg;
    std::shared_ptr<PromptLibrary> prompts;
    std::shared_ptr<JudgeBackend> shared_mock; // one instance across slots

    explicit Engine(RunConfig c) : cfg(std::move(c)) {
        prompts = std::make_shared<PromptLibrary>(cfg.prompt_dir);
        if (!cfg.mock_script.empty()) shared_mock = make_mock_backend(cfg.mock_script);
    }

    std::shared_ptr<JudgeGateway> gateway(const std::string& slot_name) {
        const JudgeConfig& jc = cfg.slot(slot_name);
        std::shared_ptr<JudgeBackend> backend =
            jc.backend_id == "mock" && shared_mock ? shared_mock
                                                   : make_backend(jc, cfg.mock_script);
        return std::make_shared<JudgeGateway>(slot_name, jc, backend, prompts, cfg.cache_dir);
    }

    MediaStoreConfig media_config() const {
        MediaStoreConfig mc;
        mc.cache_dir = cfg.cache_dir;
        mc.extractor_command = cfg.extractor_command;
        mc.padding_s = cfg.segment_padding_s;
        mc.max_extractor_procs = cfg.extractor_max_procs;
        return mc;
    }
};

std::string iso_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof(buf), "%FT%TZ", std::gmtime(&t));
    return buf;
}

// Every command writes one of these beside its output: enough provenance to
// replay the run against the cache.
void write_run_manifest(const std::string& output_path, const std::string& command,
                        const RunConfig& cfg, const std::vector<std::string>& inputs,
                        const std::map<std::string, long>& call_counts,
                        const std::string& started) {
    Json j;
    j["command"] = command;
    j["version"] = kVersion;
    j["config_digest"] = config_digest(cfg);
    Json ins;
    for (const auto& path : inputs) {
        try {
            ins[path] = sha256_file_hex(path);
        } catch (const std::exception&) {
            ins[path] = nullptr;
        }
    }
    j["input_digests"] = std::move(ins);
    Json counts;
    for (const auto& [slot, n] : call_counts) counts[slot] = n;
    j["judge_calls"] = std::move(counts);
    j["started_at"] = started;
    j["finished_at"] = iso_now();
    write_file_atomic(output_path + ".manifest.json", j.dump(2) + "\n");
}

std::string pct(const MeanStat& s) {
    if (!s.mean) return "-";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", *s.mean * 100.0);
    return buf;
}

Json mean_stat_json(const MeanStat& s) {
    Json j;
    j["mean"] = s.mean ? Json(*s.mean) : Json(nullptr);
    j["n"] = s.n;
    return j;
}

Json report_json(const DatasetReport& rep) {
    Json j;
    j["counts"] = Json{{"responses", rep.responses},
                       {"skipped", rep.skipped},
                       {"undefined_coverage", rep.undefined_coverage},
                       {"undefined_attribution", rep.undefined_attribution}};
    Json means;
    means["coverage"] = mean_stat_json(rep.coverage);
    means["precision"] = mean_stat_json(rep.precision);
    means["recall"] = mean_stat_json(rep.recall);
    means["f1"] = mean_stat_json(rep.f1);
    means["murgat_score"] = mean_stat_json(rep.murgat);
    means["over_citation_rate"] = mean_stat_json(rep.over_citation);
    Json strata;
    for (const auto& [m, s] : rep.per_modality_precision)
        strata[modality_name(m)] = mean_stat_json(s);
    means["per_modality_precision"] = std::move(strata);
    j["means"] = std::move(means);
    j["accuracy"] = mean_stat_json(rep.accuracy);
    return j;
}

void print_report_table(const DatasetReport& rep) {
    std::printf("%-22s %8s %6s\n", "metric (%)", "mean", "n");
    std::printf("%-22s %8s %6d\n", "coverage", pct(rep.coverage).c_str(), rep.coverage.n);
    std::printf("%-22s %8s %6d\n", "attribution_precision", pct(rep.precision).c_str(),
                rep.precision.n);
    std::printf("%-22s %8s %6d\n", "attribution_recall", pct(rep.recall).c_str(), rep.recall.n);
    std::printf("%-22s %8s %6d\n", "attribution_f1", pct(rep.f1).c_str(), rep.f1.n);
    std::printf("%-22s %8s %6d\n", "murgat_score", pct(rep.murgat).c_str(), rep.murgat.n);
    for (const auto& [m, s] : rep.per_modality_precision)
        std::printf("%-22s %8s %6d\n", (std::string("precision[") + modality_name(m) + "]").c_str(),
                    pct(s).c_str(), s.n);
    std::printf("%-22s %8s %6d\n", "over_citation_rate", pct(rep.over_citation).c_str(),
                rep.over_citation.n);
    std::printf("%-22s %8s %6d\n", "accuracy", pct(rep.accuracy).c_str(), rep.accuracy.n);
    std::printf("responses=%d skipped=%d undefined_coverage=%d undefined_attribution=%d\n",
                rep.responses, rep.skipped, rep.undefined_coverage, rep.undefined_attribution);
}

int usage_error(const std::string& message) {
    std::cerr << "error: " << message << "\n";
    return kUsage;
}

} // namespace

RunConfig resolve_config(const GlobalOptions& opts) {
    RunConfig cfg =
        opts.config_path.empty() ? default_run_config() : load_run_config(opts.config_path);
    return apply_overrides(cfg, opts);
}

// ── generate ────────────────────────────────────────────────────────────────

int cmd_generate(const std::string& task_file, const std::string& manifest_file,
                 const std::string& variant, const std::string& output,
                 const GlobalOptions& opts) {
    const std::string started = iso_now();
    RunConfig cfg;
    std::vector<EvalTask> tasks;
    GenerationVariant v;
    try {
        cfg = resolve_config(opts);
        v = parse_variant(variant);
        tasks = load_tasks(task_file);
    } catch (const Error& e) {
        return usage_error(e.what());
    }

    try {
        Engine engine(cfg);
        MediaStore store(load_manifest(manifest_file), engine.media_config());
        auto generator = engine.gateway("generation");
        GenerationHarness harness(generator, store, cfg.posthoc_source == "citation");

        const auto rows = harness.run_generation(tasks, v, cfg.concurrency);
        std::vector<Json> lines;
        int failures = 0;
        for (const auto& row : rows) {
            if (!row.error.empty()) ++failures;
            const std::string effort =
                cfg.slot("generation").effort_level
                    ? effort_level_name(*cfg.slot("generation").effort_level)
                    : "";
            lines.push_back(generation_row_to_json(row, cfg.slot("generation").model_name,
                                                   effort));
        }
        write_jsonl_atomic(output, lines);
        write_run_manifest(output, "generate", cfg, {task_file, manifest_file},
                           {{"generation", generator->logical_calls()}}, started);
        std::cerr << "generated " << (rows.size() - failures) << "/" << rows.size()
                  << " responses -> " << output << "\n";
        if (!tasks.empty() && failures == static_cast<int>(tasks.size())) return kOutage;
        return kOk;
    } catch (const ConfigError& e) {
        return usage_error(e.what());
    } catch (const Error& e) {
        return usage_error(e.what());
    }
}

// ── evaluate ────────────────────────────────────────────────────────────────

int cmd_evaluate(const std::string& response_file, const std::string& manifest_file,
                 const std::string& output, const std::string& report_path,
                 const std::string& task_file, const GlobalOptions& opts) {
    const std::string started = iso_now();
    RunConfig cfg;
    std::vector<Json> rows;
    std::map<std::string, char> gold_answers;
    try {
        cfg = resolve_config(opts);
        rows = read_jsonl(response_file);
        if (!task_file.empty())
            for (const auto& t : load_tasks(task_file)) gold_answers[t.question_id] = t.gold_answer;
    } catch (const Error& e) {
        return usage_error(e.what());
    }

    try {
        Engine engine(cfg);
        MediaStore store(load_manifest(manifest_file), engine.media_config());
        Judges judges;
        judges.verifiability = engine.gateway("verifiability");
        judges.decomposition = engine.gateway("decomposition");
        judges.entailment = engine.gateway("entailment");
        PipelineFlags flags;
        flags.atomic_level_verifiability = cfg.atomic_level_verifiability;
        flags.concurrency = cfg.concurrency;

        std::vector<std::optional<EvalRecord>> records(rows.size());
        std::vector<std::string> skip_reasons(rows.size());
        std::atomic<int> backend_failures{0};

        parallel_indexed(rows.size(), cfg.concurrency, [&](std::size_t i) {
            const Json& row = rows[i];
            if (row.contains("error") || !row.contains("raw")) {
                skip_reasons[i] = "generation failure record";
                return;
            }
            const std::string qid = row.value("question_id", std::string());
            const Response r = parse_response(row["raw"].get<std::string>(), qid);
            std::optional<char> gold;
            auto it = gold_answers.find(qid);
            if (it != gold_answers.end()) gold = it->second;
            try {
                records[i] = evaluate_response(r, store, judges, flags, gold);
            } catch (const BackendError& e) {
                ++backend_failures;
                skip_reasons[i] = e.what();
            } catch (const Error& e) {
                skip_reasons[i] = e.what();
            }
        });

        std::vector<Json> lines;
        std::vector<MetricBundle> bundles;
        int skipped = 0;
        for (std::size_t i = 0; i < records.size(); ++i) {
            if (!records[i]) {
                ++skipped;
                std::cerr << "skipped response " << i << ": " << skip_reasons[i] << "\n";
                continue;
            }
            lines.push_back(eval_record_to_json(*records[i]));
            bundles.push_back(records[i]->metrics);
        }
        const DatasetReport rep = aggregate(bundles, skipped);

        write_jsonl_atomic(output, lines);
        const std::string rpath = report_path.empty() ? output + ".report.json" : report_path;
        write_file_atomic(rpath, report_json(rep).dump(2) + "\n");
        write_run_manifest(output, "evaluate", cfg, {response_file, manifest_file},
                           {{"verifiability", judges.verifiability->logical_calls()},
                            {"decomposition", judges.decomposition->logical_calls()},
                            {"entailment", judges.entailment->logical_calls()}},
                           started);
        print_report_table(rep);

        if (!rows.empty() && backend_failures.load() == static_cast<int>(rows.size()))
            return kOutage;
        return kOk;
    } catch (const ConfigError& e) {
        return usage_error(e.what());
    } catch (const Error& e) {
        return usage_error(e.what());
    }
}

// ── meta-eval ───────────────────────────────────────────────────────────────

namespace {

std::vector<EvalRecord> load_eval_records(const std::string& path) {
    std::vector<EvalRecord> records;
    for (const auto& j : read_jsonl(path)) records.push_back(eval_record_from_json(j));
    return records;
}

int align_error(const std::vector<std::string>& orphans) {
    std::cerr << "error: unit ids missing from the other side:";
    for (const auto& o : orphans) std::cerr << " " << o;
    std::cerr << "\n";
    return kUsage;
}

std::optional<double> metric_value(const MetricBundle& b, const std::string& name) {
    auto get = [](const OptFraction& f) -> std::optional<double> {
        if (!f) return std::nullopt;
        return f->value();
    };
    if (name == "coverage") return get(b.coverage);
    if (name == "precision") return get(b.precision);
    if (name == "recall") return get(b.recall);
    if (name == "f1") return get(b.f1);
    if (name == "murgat_score") return get(b.murgat_score);
    throw ConfigError("unknown metric: " + name);
}

} // namespace

int cmd_meta_eval(const std::string& mode, const std::string& eval_file,
                  const std::string& gold_file, const std::string& responses_file,
                  const std::string& task_file, const std::string& metric,
                  const std::string& granularity, const std::string& output,
                  const GlobalOptions& opts) {
    const std::string started = iso_now();
    try {
        RunConfig cfg = resolve_config(opts);
        Json out;
        std::map<std::string, long> calls;

        if (mode == "verifiability-bacc" || mode == "entailment") {
            const auto records = load_eval_records(eval_file);
            const GoldLabelSet gold = load_gold_labels(gold_file);
            std::map<std::string, bool> preds;
            for (const auto& rec : records) {
                if (mode == "verifiability-bacc") {
                    for (std::size_t i = 0; i < rec.marks.size(); ++i)
                        preds[rec.question_id + ":s" + std::to_string(i)] =
                            rec.marks[i].verifiable;
                } else {
                    for (std::size_t i = 0; i < rec.judgments.size(); ++i)
                        preds[rec.question_id + ":f" + std::to_string(i)] =
                            rec.judgments[i].supported;
                }
            }
            std::vector<bool> p, g;
            std::vector<std::string> orphans;
            for (const auto& item : gold.items) {
                if (!item.flag) return usage_error("gold unit " + item.unit_id + " not boolean");
                auto it = preds.find(item.unit_id);
                if (it == preds.end()) {
                    orphans.push_back(item.unit_id);
                    continue;
                }
                g.push_back(*item.flag);
                p.push_back(it->second);
            }
            if (!orphans.empty()) return align_error(orphans);
            const double bacc = balanced_accuracy(p, g);
            out["mode"] = mode;
            out["balanced_accuracy"] = bacc;
            out["n"] = static_cast<int>(g.size());
            std::printf("%s BAcc = %.4f over %zu units\n", mode.c_str(), bacc, g.size());
        } else if (mode == "decomposition-f1") {
            const auto records = load_eval_records(eval_file);
            const GoldLabelSet gold = load_gold_labels(gold_file);
            std::map<std::string, std::vector<std::string>> generated;
            for (const auto& rec : records) {
                auto& all = generated[rec.question_id];
                for (const auto& f : rec.facts) all.push_back(f.text);
                for (std::size_t i = 0; i < rec.sentences.size(); ++i) {
                    auto& per = generated[rec.question_id + ":s" + std::to_string(i)];
                    for (const auto& f : rec.facts)
                        if (f.parent_index == static_cast<int>(i)) per.push_back(f.text);
                }
            }
            double psum = 0, rsum = 0, fsum = 0;
            int n = 0;
            std::vector<std::string> orphans;
            for (const auto& item : gold.items) {
                auto it = generated.find(item.unit_id);
                if (it == generated.end()) {
                    orphans.push_back(item.unit_id);
                    continue;
                }
                std::vector<std::string> refs;
                for (const auto& t : item.fact_texts)
                    refs.push_back(extract_citations(t).clean_text);
                const MatchScores s = greedy_match_f1(it->second, refs);
                psum += s.precision;
                rsum += s.recall;
                fsum += s.f1;
                ++n;
            }
            if (!orphans.empty()) return align_error(orphans);
            if (n == 0) return usage_error("no aligned units");
            out["mode"] = mode;
            out["precision"] = psum / n;
            out["recall"] = rsum / n;
            out["f1"] = fsum / n;
            out["n"] = n;
            std::printf("decomposition F1 = %.4f (P=%.4f R=%.4f) over %d units\n", fsum / n,
                        psum / n, rsum / n, n);
        } else if (mode == "propagation") {
            const auto records = load_eval_records(eval_file);
            double sum = 0;
            int n = 0;
            for (const auto& rec : records) {
                if (rec.facts.empty()) continue;
                sum += citation_propagation_accuracy(rec.facts, rec.sentences);
                ++n;
            }
            if (n == 0) return usage_error("no records with facts");
            out["mode"] = mode;
            out["citation_propagation"] = sum / n;
            out["n"] = n;
            std::printf("citation propagation = %.4f over %d responses\n", sum / n, n);
        } else if (mode == "correlate") {
            const auto records = load_eval_records(eval_file);
            const GoldLabelSet gold = load_gold_labels(gold_file);
            const std::string which = metric.empty() ? "murgat_score" : metric;
            std::vector<double> xs, ys;
            std::vector<std::string> orphans;
            std::map<std::string, const EvalRecord*> by_id;
            for (const auto& rec : records) by_id[rec.question_id] = &rec;
            for (const auto& item : gold.items) {
                if (!item.score) return usage_error("gold unit " + item.unit_id + " not a score");
                auto it = by_id.find(item.unit_id);
                if (it == by_id.end()) {
                    orphans.push_back(item.unit_id);
                    continue;
                }
                const auto v = metric_value(it->second->metrics, which);
                if (!v) continue; // undefined metric for this response
                xs.push_back(*v);
                ys.push_back(*item.score);
            }
            if (!orphans.empty()) return align_error(orphans);
            if (xs.size() < 2) return usage_error("need at least 2 aligned score pairs");
            const CorrelationResult c = correlate(xs, ys);
            out["mode"] = mode;
            out["metric"] = which;
            out["n"] = c.n;
            out["pearson_r"] = c.pearson_r ? Json(*c.pearson_r) : Json(nullptr);
            out["spearman_rho"] = c.spearman_rho ? Json(*c.spearman_rho) : Json(nullptr);
            out["kendall_tau"] = c.kendall_tau ? Json(*c.kendall_tau) : Json(nullptr);
            std::printf("correlate[%s]: r=%s rho=%s tau=%s n=%d\n", which.c_str(),
                        c.pearson_r ? std::to_string(*c.pearson_r).c_str() : "-",
                        c.spearman_rho ? std::to_string(*c.spearman_rho).c_str() : "-",
                        c.kendall_tau ? std::to_string(*c.kendall_tau).c_str() : "-", c.n);
        } else if (mode == "baselines") {
            Engine engine(cfg);
            auto judge = engine.gateway("verifiability");
            std::map<std::string, std::string> questions;
            if (!task_file.empty())
                for (const auto& t : load_tasks(task_file)) questions[t.question_id] = t.question;
            Json rows = Json::array();
            for (const auto& j : read_jsonl(responses_file)) {
                if (j.contains("error") || !j.contains("raw")) continue;
                const std::string qid = j.value("question_id", std::string());
                const Response r = parse_response(j["raw"].get<std::string>(), qid);
                const std::string question = questions.count(qid) ? questions[qid] : "";
                Json row;
                row["question_id"] = qid;
                try {
                    row["holistic"] = holistic_judge(r, question, *judge);
                } catch (const Error& e) {
                    row["holistic_error"] = e.what();
                }
                try {
                    const Granularity g = granularity == "sentence" ? Granularity::sentence
                                                                    : Granularity::response;
                    const DisentangledScores d = disentangled_judge(r, question, *judge, g);
                    row["dis_coverage"] = d.coverage ? Json(*d.coverage) : Json(nullptr);
                    row["dis_recall"] = d.attr_recall ? Json(*d.attr_recall) : Json(nullptr);
                    row["dis_precision"] =
                        d.attr_precision ? Json(*d.attr_precision) : Json(nullptr);
                } catch (const Error& e) {
                    row["disentangled_error"] = e.what();
                }
                rows.push_back(std::move(row));
            }
            calls["verifiability"] = judge->logical_calls();
            out["mode"] = mode;
            out["rows"] = std::move(rows);
        } else {
            return usage_error("unknown meta-eval mode: " + mode);
        }

        if (!output.empty()) {
            write_file_atomic(output, out.dump(2) + "\n");
            write_run_manifest(output, "meta-eval " + mode, cfg,
                               {eval_file, gold_file, responses_file}, calls, started);
        }
        return kOk;
    } catch (const ConfigError& e) {
        return usage_error(e.what());
    } catch (const Error& e) {
        return usage_error(e.what());
    }
}

// ── run-program ─────────────────────────────────────────────────────────────

int cmd_run_program(const std::string& task_file, const std::string& manifest_file,
                    const std::string& paradigm, const std::string& grounding,
                    const std::string& outdir, const GlobalOptions& opts) {
    const std::string started = iso_now();
    RunConfig cfg;
    prog::Paradigm par;
    prog::GroundingMode mode;
    std::vector<EvalTask> tasks;
    try {
        cfg = resolve_config(opts);
        par = prog::parse_paradigm(paradigm);
        mode = prog::parse_grounding(grounding);
        tasks = load_tasks(task_file);
    } catch (const Error& e) {
        return usage_error(e.what());
    }

    try {
        Engine engine(cfg);
        MediaStore store(load_manifest(manifest_file), engine.media_config());
        auto planner = engine.gateway("generation");
        auto describe = engine.gateway("generation");
        auto synth = engine.gateway("generation");
        auto refine = engine.gateway("entailment");
        auto retrieval_judge = engine.gateway("retrieval");

        std::shared_ptr<prog::Retriever> retriever;
        if (!cfg.mock_script.empty())
            retriever = prog::make_scripted_retriever(cfg.mock_script);
        else
            retriever = prog::make_windowed_retriever(retrieval_judge, store, cfg.find_window_s,
                                                      cfg.find_stride_s);

        prog::ExecutorConfig ec;
        ec.refinement = cfg.refinement;
        ec.concurrency = cfg.concurrency;
        prog::ProgramExecutor executor(store, describe, synth, refine, retriever, ec);

        const fs::path dir = fs::path(outdir) / (paradigm + "_" + grounding);
        fs::create_directories(dir);

        std::vector<Json> response_rows(tasks.size());
        int failures = 0;
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            Json row;
            row["question_id"] = tasks[i].question_id;
            row["variant"] = paradigm + "_" + grounding;
            try {
                std::string program_text;
                const auto program =
                    prog::plan(tasks[i], *planner, store, par, mode, &program_text);
                const auto [trace, response] = executor.execute(program, tasks[i]);
                row["raw"] = response.raw;
                row["model_name"] = cfg.slot("generation").model_name;
                write_file_atomic((dir / ("trace_" + tasks[i].question_id + ".json")).string(),
                                  prog::trace_to_json(trace).dump(2) + "\n");
                write_file_atomic((dir / ("program_" + tasks[i].question_id + ".txt")).string(),
                                  program_text);
            } catch (const Error& e) {
                row["error"] = e.what();
                ++failures;
            }
            response_rows[i] = std::move(row);
        }

        const std::string out = (dir / "responses.jsonl").string();
        write_jsonl_atomic(out, response_rows);
        write_run_manifest(out, "run-program", cfg, {task_file, manifest_file},
                           {{"generation", planner->logical_calls() + describe->logical_calls() +
                                               synth->logical_calls()},
                            {"entailment", refine->logical_calls()},
                            {"retrieval", retrieval_judge->logical_calls()}},
                           started);
        std::cerr << "programs: " << (tasks.size() - failures) << "/" << tasks.size()
                  << " completed -> " << out << "\n";
        if (!tasks.empty() && failures == static_cast<int>(tasks.size())) return kOutage;
        return kOk;
    } catch (const ConfigError& e) {
        return usage_error(e.what());
    } catch (const Error& e) {
        return usage_error(e.what());
    }
}

// ── annotations ─────────────────────────────────────────────────────────────

int cmd_annotations(const std::string& op, const std::vector<std::string>& files,
                    const std::string& output, const GlobalOptions& opts) {
    const std::string started = iso_now();
    try {
        if (files.size() != 2) return usage_error("annotations " + op + " needs two files");
        const GoldLabelSet a = load_gold_labels(files[0]);
        const GoldLabelSet b = load_gold_labels(files[1]);
        if (op == "merge") {
            const GoldLabelSet merged = merge_annotations_union(a, b);
            std::vector<Json> rows;
            for (const auto& item : merged.items) {
                Json j;
                j["unit_id"] = item.unit_id;
                j["unit_kind"] = unit_kind_name(item.kind);
                j["gold"] = *item.flag;
                j["annotator_id"] = item.annotator_id;
                rows.push_back(std::move(j));
            }
            if (output.empty()) return usage_error("annotations merge needs --output");
            write_jsonl_atomic(output, rows);
            write_run_manifest(output, "annotations merge", resolve_config(opts),
                               {files[0], files[1]}, {}, started);
            std::printf("merged %zu units -> %s\n", merged.items.size(), output.c_str());
        } else if (op == "agreement") {
            const double agr = agreement(a, b);
            std::printf("agreement = %.4f\n", agr);
            if (!output.empty())
                write_file_atomic(output, Json{{"agreement", agr}}.dump(2) + "\n");
        } else {
            return usage_error("unknown annotations op: " + op);
        }
        return kOk;
    } catch (const Error& e) {
        return usage_error(e.what());
    }
}

// ── cache ───────────────────────────────────────────────────────────────────

int cmd_cache(const std::string& op, const GlobalOptions& opts) {
    try {
        const RunConfig cfg = resolve_config(opts);
        const fs::path judge_dir = fs::path(cfg.cache_dir) / "judge";
        const fs::path clips_dir = fs::path(cfg.cache_dir) / "clips";
        if (op == "inspect") {
            auto count = [](const fs::path& dir) {
                std::size_t files = 0, bytes = 0;
                if (fs::is_directory(dir))
                    for (const auto& e : fs::directory_iterator(dir))
                        if (e.is_regular_file()) {
                            ++files;
                            bytes += e.file_size();
                        }
                return std::pair{files, bytes};
            };
            const auto [jf, jb] = count(judge_dir);
            const auto [cf, cb] = count(clips_dir);
            std::printf("judge responses: %zu files, %zu bytes\n", jf, jb);
            std::printf("media clips:     %zu files, %zu bytes\n", cf, cb);
            return kOk;
        }
        if (op == "clear") {
            fs::remove_all(judge_dir);
            fs::remove_all(clips_dir);
            std::printf("cache cleared under %s\n", cfg.cache_dir.c_str());
            return kOk;
        }
        return usage_error("unknown cache op: " + op);
    } catch (const Error& e) {
        return usage_error(e.what());
    }
}

} // namespace murgat::cli
