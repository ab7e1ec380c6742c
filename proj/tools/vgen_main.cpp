// vgen: multi-agent Verilog generation, repair, and evaluation driver.

#include <atomic>
#include <csignal>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vgen/agents.hpp"
#include "vgen/backend.hpp"
#include "vgen/domain.hpp"
#include "vgen/eval.hpp"
#include "vgen/orchestrator.hpp"
#include "vgen/sim.hpp"
#include "vgen/transcript.hpp"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitConfig = 2;

std::atomic<bool> g_stop{false};

void handle_signal(int) { g_stop.store(true); }

struct CommonOpts {
    std::string mode = "coopetitive";
    int k_max = 2;
    std::string backend_kind = "scripted";
    std::string backend_script;
    std::string backend_url;
    std::string model_name;
    std::string api_key_env = "VGEN_API_KEY";
    std::string templates_dir;
    std::string iverilog_path = "iverilog";
    std::string vvp_path = "vvp";
    double timeout_s = 30.0;
    bool keep_artifacts = false;
    std::string degeneration_policy = "flag-only";
    int seed_base = 0;
    double temperature = 0.7;
    int max_tokens = 4096;
};

void add_common_options(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--mode", o.mode, "Pipeline mode: coopetitive | cooperation-only | single-agent")
        ->check(CLI::IsMember({"coopetitive", "cooperation-only", "single-agent"}))
        ->capture_default_str();
    cmd->add_option("--k-max", o.k_max, "Maximum correction iterations")->capture_default_str();
    cmd->add_option("--backend", o.backend_kind,
                    "Backend kind: scripted | replay | record | live")
        ->check(CLI::IsMember({"scripted", "replay", "record", "live"}))
        ->capture_default_str();
    cmd->add_option("--backend-script", o.backend_script,
                    "Script file for scripted/replay/record backends (JSONL)");
    cmd->add_option("--backend-url", o.backend_url, "Base URL for the live backend");
    cmd->add_option("--model", o.model_name, "Model name for the live backend");
    cmd->add_option("--api-key-env", o.api_key_env,
                    "Environment variable holding the API bearer token")
        ->capture_default_str();
    cmd->add_option("--templates", o.templates_dir,
                    "Prompt template directory (templates/<role>.txt); built-ins when omitted");
    cmd->add_option("--iverilog", o.iverilog_path, "Verilog compiler executable")
        ->capture_default_str();
    cmd->add_option("--vvp", o.vvp_path, "Simulation runtime executable")->capture_default_str();
    cmd->add_option("--timeout", o.timeout_s, "Per-simulation wall-clock timeout in seconds")
        ->capture_default_str();
    cmd->add_flag("--keep-artifacts", o.keep_artifacts, "Keep simulation working directories");
    cmd->add_option("--degeneration-policy", o.degeneration_policy,
                    "On repeated identical code: flag-only | abort")
        ->check(CLI::IsMember({"flag-only", "abort"}))
        ->capture_default_str();
    cmd->add_option("--seed-base", o.seed_base, "Base seed; trial i uses seed-base + i")
        ->capture_default_str();
    cmd->add_option("--temperature", o.temperature, "Sampling temperature")
        ->capture_default_str();
    cmd->add_option("--max-tokens", o.max_tokens, "Completion token budget")
        ->capture_default_str();
}

vgen::BackendConfig backend_config(const CommonOpts& o) {
    vgen::BackendConfig cfg;
    cfg.kind = vgen::parse_backend_kind(o.backend_kind);
    cfg.script_path = o.backend_script;
    cfg.base_url = o.backend_url;
    cfg.model_name = o.model_name;
    cfg.api_key_env = o.api_key_env;
    cfg.validate();
    return cfg;
}

vgen::RunConfig run_config(const CommonOpts& o) {
    vgen::RunConfig cfg;
    cfg.mode = vgen::parse_run_mode(o.mode);
    cfg.k_max = o.k_max;
    cfg.degeneration_policy = vgen::parse_degeneration_policy(o.degeneration_policy);
    cfg.validate();
    return cfg;
}

vgen::SimConfig sim_config(const CommonOpts& o) {
    vgen::SimConfig cfg;
    cfg.iverilog_path = o.iverilog_path;
    cfg.vvp_path = o.vvp_path;
    cfg.timeout_s = o.timeout_s;
    cfg.keep_artifacts = o.keep_artifacts;
    return cfg;
}

vgen::PromptTemplateSet load_templates(const CommonOpts& o) {
    return o.templates_dir.empty() ? vgen::PromptTemplateSet::builtin()
                                   : vgen::PromptTemplateSet::load_dir(o.templates_dir);
}

std::vector<int> parse_k_list(const std::string& spec) {
    std::vector<int> ks;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) ks.push_back(std::stoi(item));
    if (ks.empty()) throw vgen::ConfigError("empty --k list");
    return ks;
}

int cmd_generate(const CommonOpts& opts, const std::string& problem_file,
                 const std::string& out_path) {
    std::vector<vgen::Problem> problems = vgen::load_problems(problem_file, "native");
    if (problems.size() != 1)
        throw vgen::ConfigError("generate expects exactly one problem, got " +
                                std::to_string(problems.size()));
    const vgen::Problem& problem = problems.front();

    std::unique_ptr<vgen::Backend> backend = vgen::make_backend(backend_config(opts));
    vgen::IcarusSimulator sim(sim_config(opts));
    vgen::PromptTemplateSet templates = load_templates(opts);

    vgen::TrialTranscript tr = vgen::run_trial(problem.spec, run_config(opts), opts.seed_base,
                                               *backend, templates, sim);
    vgen::rescore_against_reference(tr, problem, sim);
    if (!out_path.empty()) vgen::save_transcript(tr, out_path);

    // print the final code revision and verdict
    const nlohmann::json* last_code = nullptr;
    for (const vgen::TranscriptEvent& ev : tr.events)
        if ((ev.actor == vgen::Actor::CodeGen || ev.actor == vgen::Actor::CodeReviser) &&
            ev.payload.contains("text"))
            last_code = &ev.payload;
    if (last_code) std::cout << (*last_code)["text"].get<std::string>() << "\n\n";
    std::cout << "verdict: " << (tr.final.pass ? "PASS" : "FAIL")
              << " (iterations_used=" << tr.final.iterations_used
              << ", degeneration_flagged=" << (tr.final.degeneration_flagged ? "true" : "false")
              << ")\n";
    return tr.final.pass ? kExitPass : kExitFail;
}

int cmd_bench(const CommonOpts& opts, const std::string& problems_file,
              const std::string& format, const std::string& mapping, int n,
              const std::string& k_spec, const std::string& out_dir, int jobs) {
    std::vector<vgen::Problem> problems = vgen::load_problems(problems_file, format, mapping);
    std::vector<int> k_list = parse_k_list(k_spec);
    vgen::RunConfig cfg = run_config(opts);
    vgen::PromptTemplateSet templates = load_templates(opts);
    vgen::SimConfig scfg = sim_config(opts);
    vgen::BackendConfig bcfg = backend_config(opts);

    // scripted backends are rebuilt per trial so queues never interleave
    vgen::BackendFactory backend_factory;
    std::shared_ptr<vgen::Backend> shared;
    if (bcfg.kind == vgen::BackendKind::Live || bcfg.kind == vgen::BackendKind::Record) {
        shared = vgen::make_backend(bcfg);
        struct Proxy : vgen::Backend {
            std::shared_ptr<vgen::Backend> inner;
            vgen::ChatResponse complete(const vgen::ChatRequest& req) override {
                return inner->complete(req);
            }
        };
        backend_factory = [shared](const vgen::Problem&, int) {
            auto p = std::make_unique<Proxy>();
            p->inner = shared;
            return p;
        };
    } else {
        backend_factory = [bcfg](const vgen::Problem&, int) { return vgen::make_backend(bcfg); };
    }
    vgen::SimulatorFactory sim_factory = [scfg](const vgen::Problem&, int) {
        return std::make_unique<vgen::IcarusSimulator>(scfg);
    };

    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);
    vgen::BenchmarkReport report =
        vgen::run_benchmark(problems, cfg, n, k_list, out_dir, backend_factory, sim_factory,
                            templates, jobs, &g_stop);
    vgen::write_report(report, out_dir);
    std::cout << vgen::report_to_text(report);
    if (g_stop.load()) {
        std::cerr << "interrupted: partial results persisted; rerun to resume\n";
        return kExitFail;
    }
    return kExitPass;
}

int cmd_replay(const std::string& transcript_file, bool verify, const CommonOpts& opts) {
    vgen::TrialTranscript tr = vgen::load_transcript(transcript_file);
    std::cout << "problem: " << tr.problem_id << "  seed: " << tr.seed
              << "  mode: " << vgen::to_string(tr.mode) << "\n";
    for (const vgen::TranscriptEvent& ev : tr.events) {
        std::cout << "  t=" << ev.t << "  " << vgen::to_string(ev.actor);
        if (!ev.input_digest.empty()) std::cout << "  digest=" << ev.input_digest;
        if (ev.payload.contains("iteration"))
            std::cout << "  iter=" << ev.payload["iteration"].get<int>();
        if (ev.payload.contains("pass"))
            std::cout << "  pass=" << (ev.payload["pass"].get<bool>() ? "true" : "false");
        if (ev.payload.contains("error"))
            std::cout << "  error=" << ev.payload["error"].get<std::string>();
        std::cout << "\n";
    }
    std::cout << "final: pass=" << (tr.final.pass ? "true" : "false")
              << " iterations_used=" << tr.final.iterations_used
              << " degeneration_flagged=" << (tr.final.degeneration_flagged ? "true" : "false")
              << "\n";

    if (verify) {
        // re-run each simulator event against the artifacts recorded before it
        vgen::IcarusSimulator sim(sim_config(opts));
        std::string code_text, tb_text;
        for (size_t i = 0; i < tr.events.size(); ++i) {
            const vgen::TranscriptEvent& ev = tr.events[i];
            if ((ev.actor == vgen::Actor::CodeGen || ev.actor == vgen::Actor::CodeReviser) &&
                ev.payload.contains("text"))
                code_text = ev.payload["text"].get<std::string>();
            if ((ev.actor == vgen::Actor::TbGen || ev.actor == vgen::Actor::TbReviser) &&
                ev.payload.contains("text"))
                tb_text = ev.payload["text"].get<std::string>();
            if (ev.actor == vgen::Actor::Simulator && ev.payload.contains("pass") &&
                !ev.payload.value("rescore", false)) {
                if (code_text.empty() || tb_text.empty()) continue;
                vgen::ErrorReport rerun = sim.run(vgen::VerilogSource::make(code_text, 0),
                                                  vgen::TestbenchSource::make(tb_text, 0));
                bool recorded = ev.payload["pass"].get<bool>();
                if (rerun.pass != recorded)
                    throw vgen::VerifyMismatch(
                        "simulator event at index " + std::to_string(i) + " recorded pass=" +
                        (recorded ? "true" : "false") + " but re-run produced pass=" +
                        (rerun.pass ? "true" : "false"));
                std::cout << "  verified event t=" << ev.t << "\n";
            }
        }
    }
    return kExitPass;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-agent Verilog generation and repair engine"};
    app.require_subcommand(1);
    app.fallthrough(); // let --config and other app options follow the subcommand
    app.set_config("--config", "", "Read options from a TOML/INI config file");
    app.footer(
        "Modes: coopetitive (researcher + prosecutor), cooperation-only (no prosecutor),\n"
        "single-agent (one agent revises both artifacts).\n"
        "Problem formats: native (JSONL), verilogeval-jsonl (JSONL + field mapping),\n"
        "rtllm-dir (directory + file mapping).\n"
        "Backends: scripted, replay, record, live. Exit codes: 0 pass, 1 fail, 2 config error.");

    CommonOpts opts;

    auto* gen = app.add_subcommand("generate", "Run one problem through the pipeline");
    std::string problem_file, out_path;
    gen->add_option("problem", problem_file, "Native-format problem file (single line)")
        ->required();
    gen->add_option("--out", out_path, "Transcript output path (JSONL)");
    add_common_options(gen, opts);

    auto* bench = app.add_subcommand("bench", "Run a benchmark over a problem set");
    std::string problems_file, format = "native", mapping, out_dir = "bench-out",
                k_spec = "1,5,10";
    int n = 20, jobs = 1;
    bool resume = false;
    bench->add_option("problems", problems_file, "Problem set path")->required();
    bench->add_option("--format", format, "Problem format: native | verilogeval-jsonl | rtllm-dir")
        ->check(CLI::IsMember({"native", "verilogeval-jsonl", "rtllm-dir"}))
        ->capture_default_str();
    bench->add_option("--mapping", mapping, "Field-mapping file for adapter formats");
    bench->add_option("--n", n, "Trials per problem")->capture_default_str();
    bench->add_option("--k", k_spec, "Comma-separated pass@k list")->capture_default_str();
    bench->add_option("--out-dir", out_dir, "Output directory for transcripts and reports")
        ->capture_default_str();
    bench->add_option("--jobs", jobs, "Concurrent trial workers")->capture_default_str();
    bench->add_flag("--resume", resume,
                    "Resume: skip (problem, seed) pairs with existing transcripts (always on; "
                    "flag kept for scripting clarity)");
    add_common_options(bench, opts);

    auto* replay = app.add_subcommand("replay", "Print the event timeline of a transcript");
    std::string transcript_file;
    bool verify = false;
    replay->add_option("transcript", transcript_file, "Transcript file (JSONL)")->required();
    replay->add_flag("--verify", verify, "Re-run simulator events and compare pass bits");
    add_common_options(replay, opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_generate(opts, problem_file, out_path);
        if (bench->parsed())
            return cmd_bench(opts, problems_file, format, mapping, n, k_spec, out_dir, jobs);
        if (replay->parsed()) return cmd_replay(transcript_file, verify, opts);
    } catch (const vgen::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const vgen::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const vgen::MappingError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const vgen::VerifyMismatch& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFail;
    } catch (const vgen::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFail;
    }
    return kExitConfig;
}
