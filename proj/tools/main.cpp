#include "murgat/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    using namespace murgat::cli;

    CLI::App app{"murgat: fact-level multimodal attribution evaluation engine"};
    app.require_subcommand(1);

    GlobalOptions opts;
    app.add_option("--config", opts.config_path, "run configuration JSON");
    int concurrency = 0;
    app.add_option("--concurrency", concurrency, "parallel judge calls / responses");
    std::string cache_dir;
    app.add_option("--cache-dir", cache_dir, "judge and clip cache directory");
    app.add_option("--mock", opts.mock_script,
                   "scripted-response file; activates the deterministic mock backend");

    // generate
    auto* generate = app.add_subcommand("generate", "produce candidate responses");
    std::string task_file, manifest_file, variant = "citation", output;
    generate->add_option("--tasks", task_file, "task JSONL")->required();
    generate->add_option("--manifest", manifest_file, "media manifest JSONL")->required();
    generate->add_option("--variant", variant, "base | citation | posthoc");
    generate->add_option("--output", output, "response JSONL output")->required();

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "run the three-subtask evaluation");
    std::string ev_responses, ev_manifest, ev_output, ev_report, ev_tasks;
    evaluate->add_option("--responses", ev_responses, "response JSONL")->required();
    evaluate->add_option("--manifest", ev_manifest, "media manifest JSONL")->required();
    evaluate->add_option("--output", ev_output, "eval record JSONL output")->required();
    evaluate->add_option("--report", ev_report, "dataset report JSON (default <output>.report.json)");
    evaluate->add_option("--tasks", ev_tasks, "task JSONL with gold answers (for accuracy)");

    // meta-eval
    auto* meta = app.add_subcommand("meta-eval", "evaluate the evaluator");
    std::string mode, me_eval, me_gold, me_responses, me_tasks, me_metric, me_gran = "response",
                             me_output;
    meta->add_option("mode", mode,
                     "verifiability-bacc | decomposition-f1 | propagation | entailment | "
                     "correlate | baselines")
        ->required();
    meta->add_option("--eval", me_eval, "eval record JSONL");
    meta->add_option("--gold", me_gold, "gold label JSONL");
    meta->add_option("--responses", me_responses, "response JSONL (baselines mode)");
    meta->add_option("--tasks", me_tasks, "task JSONL (baselines mode)");
    meta->add_option("--metric", me_metric, "metric for correlate mode (default murgat_score)");
    meta->add_option("--granularity", me_gran, "response | sentence (baselines mode)");
    meta->add_option("--output", me_output, "report JSON output");

    // run-program
    auto* runp = app.add_subcommand("run-program", "plan and execute grounding programs");
    std::string rp_tasks, rp_manifest, rp_paradigm, rp_grounding, rp_outdir;
    runp->add_option("--tasks", rp_tasks, "task JSONL")->required();
    runp->add_option("--manifest", rp_manifest, "media manifest JSONL")->required();
    runp->add_option("--paradigm", rp_paradigm, "logic | narrative")->required();
    runp->add_option("--grounding", rp_grounding, "declarative | imperative")->required();
    runp->add_option("--outdir", rp_outdir, "trace/response output directory")->required();

    // annotations
    auto* ann = app.add_subcommand("annotations", "merge annotator files or compute agreement");
    std::string ann_op, ann_output;
    std::vector<std::string> ann_files;
    ann->add_option("op", ann_op, "merge | agreement")->required();
    ann->add_option("files", ann_files, "two gold label JSONL files")->expected(2);
    ann->add_option("--output", ann_output, "merged output path");

    // cache
    auto* cache = app.add_subcommand("cache", "inspect or clear the response/clip cache");
    std::string cache_op;
    cache->add_option("op", cache_op, "inspect | clear")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        app.exit(e);
        return kUsage;
    }

    if (concurrency > 0) opts.concurrency = concurrency;
    if (!cache_dir.empty()) opts.cache_dir = cache_dir;

    if (generate->parsed())
        return cmd_generate(task_file, manifest_file, variant, output, opts);
    if (evaluate->parsed())
        return cmd_evaluate(ev_responses, ev_manifest, ev_output, ev_report, ev_tasks, opts);
    if (meta->parsed())
        return cmd_meta_eval(mode, me_eval, me_gold, me_responses, me_tasks, me_metric, me_gran,
                             me_output, opts);
    if (runp->parsed())
        return cmd_run_program(rp_tasks, rp_manifest, rp_paradigm, rp_grounding, rp_outdir, opts);
    if (ann->parsed()) return cmd_annotations(ann_op, ann_files, ann_output, opts);
    if (cache->parsed()) return cmd_cache(cache_op, opts);

    std::cerr << "no subcommand\n";
    return kUsage;
}
