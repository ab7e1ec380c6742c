// Acceptance suite: one pass/fail line per criterion, exit 0 iff none failed.
// Criterion 5 needs the real Verilog toolchain and prints SKIP when it is
// not installed.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "test_util.hpp"
#include "vgen/agents.hpp"
#include "vgen/backend.hpp"
#include "vgen/domain.hpp"
#include "vgen/eval.hpp"
#include "vgen/orchestrator.hpp"
#include "vgen/sim.hpp"
#include "vgen/transcript.hpp"

using namespace vgen;
using namespace testutil;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

struct Check {
    std::ostringstream why;
    bool ok = true;

    void expect(bool cond, const std::string& what) {
        if (!cond) {
            if (!ok) why << "; ";
            why << what;
            ok = false;
        }
    }
};

void report(int index, const std::string& title, const Check& c, double budget_s,
            double elapsed_s) {
    bool ok = c.ok && elapsed_s <= budget_s;
    std::cout << "criterion " << index << " [" << title << "]: " << (ok ? "PASS" : "FAIL");
    if (!c.ok) std::cout << " (" << c.why.str() << ")";
    if (elapsed_s > budget_s)
        std::cout << " (took " << elapsed_s << "s, budget " << budget_s << "s)";
    std::cout << "\n";
    if (!ok) ++g_failures;
}

void run(int index, const std::string& title, double budget_s,
         const std::function<void(Check&)>& body) {
    Check c;
    auto start = Clock::now();
    try {
        body(c);
    } catch (const std::exception& e) {
        c.expect(false, std::string("unexpected exception: ") + e.what());
    }
    double elapsed = std::chrono::duration<double>(Clock::now() - start).count();
    report(index, title, c, budget_s, elapsed);
}

// -- criterion 1: estimator exactness against exhaustive enumeration ---------

double pass_at_k_enumerated(int n, int c, int k) {
    long hits = 0, total = 0;
    std::vector<int> idx(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) idx[static_cast<size_t>(i)] = i;
    while (true) {
        ++total;
        for (int i : idx)
            if (i < c) {
                ++hits;
                break;
            }
        int pos = k - 1;
        while (pos >= 0 && idx[static_cast<size_t>(pos)] == n - k + pos) --pos;
        if (pos < 0) break;
        ++idx[static_cast<size_t>(pos)];
        for (int i = pos + 1; i < k; ++i)
            idx[static_cast<size_t>(i)] = idx[static_cast<size_t>(i - 1)] + 1;
    }
    return static_cast<double>(hits) / static_cast<double>(total);
}

void criterion_estimator(Check& c) {
    for (int n = 1; n <= 12; ++n)
        for (int cc = 0; cc <= n; ++cc)
            for (int k = 1; k <= n; ++k)
                if (std::abs(pass_at_k(n, cc, k) - pass_at_k_enumerated(n, cc, k)) >= 1e-12) {
                    c.expect(false, "mismatch at n=" + std::to_string(n) + " c=" +
                                        std::to_string(cc) + " k=" + std::to_string(k));
                    return;
                }
}

// -- criterion 2: scripted trial scenarios ------------------------------------

struct Scenario {
    std::string name;
    RunMode mode = RunMode::Coopetitive;
    DegenerationPolicy policy = DegenerationPolicy::FlagOnly;
    std::function<std::unique_ptr<ScriptedBackend>()> backend;
    bool expect_pass = false;
    int expect_iterations = 0;
    bool expect_degeneration = false;
};

std::vector<Scenario> scripted_scenarios() {
    std::vector<Scenario> v;

    v.push_back({"pass at birth", RunMode::Coopetitive, DegenerationPolicy::FlagOnly,
                 [] {
                     auto be = std::make_unique<ScriptedBackend>();
                     be->push(Actor::CodeGen, fenced(kAndGood));
                     be->push(Actor::TbGen, fenced(kAndTb));
                     return be;
                 },
                 true, 0, false});
    v.push_back({"fix at first round", RunMode::Coopetitive, DegenerationPolicy::FlagOnly,
                 [] { return scripted_trial_backend(1); }, true, 1, false});
    v.push_back({"fix at second round", RunMode::Coopetitive, DegenerationPolicy::FlagOnly,
                 [] { return scripted_trial_backend(2); }, true, 2, false});
    v.push_back({"fix at final round", RunMode::Coopetitive, DegenerationPolicy::FlagOnly,
                 [] { return scripted_trial_backend(3); }, true, 3, false});

    auto never_pass = [](bool distinct) {
        return [distinct] {
            auto be = std::make_unique<ScriptedBackend>();
            be->push(Actor::CodeGen, fenced(kAndBad));
            be->push(Actor::TbGen, fenced(kAndTb));
            for (int k = 0; k < 3; ++k) {
                be->push(Actor::Researcher, researcher_response("retry", "none"));
                if (k >= 1) be->push(Actor::Prosecutor, prosecutor_response(4, 8, "retry", "none"));
                std::string body = distinct
                                       ? "module and_gate(input a, input b, output out);\n"
                                         "assign out = a | b | " + std::to_string(k) + "'b0;\n"
                                         "endmodule"
                                       : std::string(kAndBad);
                be->push(Actor::CodeReviser, fenced(body));
            }
            return be;
        };
    };
    v.push_back({"never passes, distinct revisions", RunMode::Coopetitive,
                 DegenerationPolicy::FlagOnly, never_pass(true), false, 3, false});
    v.push_back({"degenerating revisions flagged", RunMode::Coopetitive,
                 DegenerationPolicy::FlagOnly, never_pass(false), false, 3, true});

    v.push_back({"cooperation-only never passes", RunMode::CooperationOnly,
                 DegenerationPolicy::FlagOnly,
                 [] {
                     auto be = std::make_unique<ScriptedBackend>();
                     be->push(Actor::CodeGen, fenced(kAndBad));
                     be->push(Actor::TbGen, fenced(kAndTb));
                     for (int k = 0; k < 3; ++k) {
                         be->push(Actor::Researcher, researcher_response("retry", "none"));
                         be->push(Actor::CodeReviser, fenced(kAndBad));
                     }
                     return be;
                 },
                 false, 3, true});

    v.push_back({"malformed researcher output", RunMode::Coopetitive,
                 DegenerationPolicy::FlagOnly,
                 [] {
                     auto be = std::make_unique<ScriptedBackend>();
                     be->push(Actor::CodeGen, fenced(kAndBad));
                     be->push(Actor::TbGen, fenced(kAndTb));
                     be->push(Actor::Researcher, "not a tagged response");
                     be->push(Actor::Researcher, "still not tagged");
                     return be;
                 },
                 false, 0, false});

    v.push_back({"interface violation", RunMode::Coopetitive, DegenerationPolicy::FlagOnly,
                 [] {
                     auto be = std::make_unique<ScriptedBackend>();
                     be->push(Actor::CodeGen,
                              fenced("module and_gate(input a, input c, output out);\n"
                                     "assign out = a;\nendmodule"));
                     return be;
                 },
                 false, 0, false});

    v.push_back({"single-agent fix", RunMode::SingleAgent, DegenerationPolicy::FlagOnly,
                 [] {
                     auto be = std::make_unique<ScriptedBackend>();
                     be->push(Actor::CodeGen, fenced(kAndBad));
                     be->push(Actor::TbGen, fenced(kAndTb));
                     be->push(Actor::CodeReviser, "CODE:\n" + fenced(kAndGood) + "\nTESTBENCH:\n" +
                                                      fenced(kAndTb));
                     return be;
                 },
                 true, 1, false});

    return v;
}

void criterion_scenarios(Check& c) {
    std::vector<Scenario> scenarios = scripted_scenarios();
    c.expect(scenarios.size() >= 8, "fewer than 8 scenarios");
    ModuleSpec spec = and_gate_spec();
    for (const Scenario& sc : scenarios) {
        RunConfig cfg;
        cfg.mode = sc.mode;
        cfg.k_max = 2;
        cfg.degeneration_policy = sc.policy;
        auto run_once = [&] {
            auto be = sc.backend();
            auto sim = and_checking_simulator();
            return run_trial(spec, cfg, 11, *be, PromptTemplateSet::builtin(), *sim);
        };
        TrialTranscript tr = run_once();
        c.expect(tr.final.pass == sc.expect_pass, sc.name + ": pass bit");
        c.expect(tr.final.iterations_used == sc.expect_iterations, sc.name + ": iterations");
        c.expect(tr.final.degeneration_flagged == sc.expect_degeneration,
                 sc.name + ": degeneration flag");
        std::vector<std::string> bad = check_invariants(tr, cfg.k_max);
        for (const std::string& b : bad) c.expect(false, sc.name + ": " + b);
        // determinism: a second run serializes byte-identically
        c.expect(to_jsonl(run_once()) == to_jsonl(tr), sc.name + ": transcripts differ");
    }
}

// -- criterion 3: prosecutor rescues propagated strategy errors ---------------

struct ProblemFix {
    std::string wrong;
    std::string right_marker; // substring proving the fix landed
};

const std::map<std::string, ProblemFix> kFixes = {
    {"and_gate",
     {"module and_gate(input a, input b, output out);\nassign out = a | b;\nendmodule",
      "a & b"}},
    {"mux2",
     {"module mux2(input sel, input [7:0] a, input [7:0] b, output [7:0] out);\n"
      "assign out = sel ? a : b;\nendmodule",
      "sel ? b : a"}},
    {"adder8",
     {"module adder8(input [7:0] x, input [7:0] y, output [8:0] s);\nassign s = x - y;\n"
      "endmodule",
      "x + y"}},
};

double fault_injection_pass_at_1(RunMode mode, const std::string& out_dir) {
    std::vector<Problem> problems =
        load_problems(VGEN_SOURCE_DIR "/problems/sample3.jsonl", "native");

    BackendFactory backend_factory = [mode](const Problem& p, int) -> std::unique_ptr<Backend> {
        const ProblemFix& fix = kFixes.at(p.spec.problem_id);
        auto be = std::make_unique<ScriptedBackend>();
        be->push(Actor::CodeGen, fenced(fix.wrong));
        be->push(Actor::TbGen, fenced(kAndTb));
        for (int k = 0; k < 3; ++k) {
            // the flawed researcher keeps doubling down on the wrong strategy
            be->push(Actor::Researcher, researcher_response("keep the current expression", "none"));
            if (mode == RunMode::Coopetitive && k >= 1)
                be->push(Actor::Prosecutor,
                         prosecutor_response(2, 8, "use the correct operator", "none"));
            // the reviser lands the fix exactly when the prosecutor's strategy
            // reaches it; the researcher's flawed one reproduces the bug
            bool fixed = mode == RunMode::Coopetitive && k >= 1;
            be->push(Actor::CodeReviser,
                     fenced(fixed ? *p.spec.reference_solution : fix.wrong));
        }
        return be;
    };
    SimulatorFactory sim_factory = [](const Problem& p, int) -> std::unique_ptr<Simulator> {
        std::string marker = kFixes.at(p.spec.problem_id).right_marker;
        return std::make_unique<LambdaSimulator>(
            [marker](const VerilogSource& code, const TestbenchSource&) {
                ErrorReport r;
                r.phase = SimPhase::Simulate;
                r.pass = code.text.find(marker) != std::string::npos;
                if (!r.pass) {
                    ErrorEntry e;
                    e.kind = ErrorKind::Mismatch;
                    e.message = "testbench checks failed";
                    r.entries.push_back(e);
                }
                return r;
            });
    };

    RunConfig cfg;
    cfg.mode = mode;
    cfg.k_max = 2;
    BenchmarkReport report =
        run_benchmark(problems, cfg, 1, {1}, out_dir, backend_factory, sim_factory,
                      PromptTemplateSet::builtin(), 1);
    return report.pass_at_k_func.at(1);
}

void criterion_fault_injection(Check& c) {
    TempDir coop("acc3-coop"), solo("acc3-solo");
    double with_prosecutor = fault_injection_pass_at_1(RunMode::Coopetitive, coop.str());
    double without = fault_injection_pass_at_1(RunMode::CooperationOnly, solo.str());
    c.expect(std::abs(with_prosecutor - 1.0) < 1e-12,
             "coopetitive pass@1 = " + std::to_string(with_prosecutor) + ", expected 1.0");
    c.expect(std::abs(without - 0.0) < 1e-12,
             "cooperation-only pass@1 = " + std::to_string(without) + ", expected 0.0");
}

// -- criterion 4: degeneration detection --------------------------------------

void criterion_degeneration(Check& c) {
    ModuleSpec spec = and_gate_spec();
    RunConfig cfg;
    cfg.mode = RunMode::SingleAgent;
    cfg.k_max = 2;

    std::string identical = "CODE:\n" + fenced(kAndBad) + "\nTESTBENCH:\n" + fenced(kAndTb);
    {
        ScriptedBackend be;
        be.push(Actor::CodeGen, fenced(kAndBad));
        be.push(Actor::TbGen, fenced(kAndTb));
        be.push(Actor::CodeReviser, identical);
        RunConfig abort_cfg = cfg;
        abort_cfg.degeneration_policy = DegenerationPolicy::Abort;
        auto sim = and_checking_simulator();
        TrialTranscript tr = run_trial(spec, abort_cfg, 0, be, PromptTemplateSet::builtin(), *sim);
        c.expect(tr.final.degeneration_flagged, "first identical revision not flagged");
        c.expect(tr.final.iterations_used == 1, "abort policy did not stop at the first repeat");
    }
    {
        ScriptedBackend be;
        be.push(Actor::CodeGen, fenced(kAndBad));
        be.push(Actor::TbGen, fenced(kAndTb));
        be.push(Actor::CodeReviser, "CODE:\n" +
                                        fenced("module and_gate(input a, input b, output out);\n"
                                               "assign out = a ^ b;\nendmodule") +
                                        "\nTESTBENCH:\n" + fenced(kAndTb));
        be.push(Actor::CodeReviser, "CODE:\n" + fenced(kAndGood) + "\nTESTBENCH:\n" +
                                        fenced(kAndTb));
        auto sim = and_checking_simulator();
        TrialTranscript tr = run_trial(spec, cfg, 0, be, PromptTemplateSet::builtin(), *sim);
        c.expect(!tr.final.degeneration_flagged, "distinct revisions were flagged");
        c.expect(tr.final.pass, "distinct-revision trial should pass");
    }
}

// -- criterion 5: real Verilog toolchain --------------------------------------

bool toolchain_present() {
    return std::system("command -v iverilog > /dev/null 2>&1") == 0 &&
           std::system("command -v vvp > /dev/null 2>&1") == 0;
}

void criterion_toolchain(Check& c) {
    std::vector<Problem> problems =
        load_problems(VGEN_SOURCE_DIR "/problems/sample3.jsonl", "native");
    SimConfig scfg;
    TempDir work("acc5");
    scfg.work_root = work.str();
    IcarusSimulator sim(scfg);
    for (const Problem& p : problems) {
        VerilogSource good = VerilogSource::make(*p.spec.reference_solution, 0);
        TestbenchSource tb = TestbenchSource::make(*p.spec.reference_testbench, 0);
        ErrorReport report = sim.run(good, tb);
        c.expect(report.pass, p.spec.problem_id + ": reference solution did not pass");
    }
    // a broken mux must be caught as a functional mismatch, not a compile error
    VerilogSource bad = VerilogSource::make(kFixes.at("mux2").wrong, 0);
    TestbenchSource tb =
        TestbenchSource::make(*problems[1].spec.reference_testbench, 0);
    ErrorReport report = sim.run(bad, tb);
    c.expect(!report.pass, "broken mux passed the reference testbench");
    c.expect(report.phase == SimPhase::Simulate, "broken mux did not reach simulation");
    bool mismatch = false;
    for (const ErrorEntry& e : report.entries)
        if (e.kind == ErrorKind::Mismatch) mismatch = true;
    c.expect(mismatch, "no mismatch entry for the broken mux");
}

// -- criterion 6: header parser corpus ----------------------------------------

void criterion_headers(Check& c) {
    struct H {
        std::string header;
        size_t ports;
    };
    const std::vector<H> corpus = {
        {"module m();", 0},
        {"module and_gate(input a, input b, output out);", 3},
        {"module buf1(input in, output out);", 2},
        {"module mux2(input sel, input [7:0] a, input [7:0] b, output [7:0] out);", 4},
        {"module adder8(input [7:0] x, input [7:0] y, output [8:0] s);", 3},
        {"module wide(input [31:0] bus, output [31:0] q);", 2},
        {"module rev(input [0:7] msb_first, output [0:7] q);", 2},
        {"module regs(input clk, input rst, input d, output reg q);", 4},
        {"module io(input a, inout b, output c);", 3},
        {"module wires(input wire a, output wire b);", 2},
        {"module logics(input logic a, output logic [3:0] b);", 2},
        {"module signed_port(input signed [7:0] a, output signed [8:0] b);", 2},
        {"module spaced ( input a , output b );", 2},
        {"module newline(\n  input a,\n  input b,\n  output y\n);", 3},
        {"module tabbed(\tinput a,\toutput z);", 2},
        {"module grouped(input a, b, output y);", 3},
        {"module grouped_vec(input [3:0] a, b, output [3:0] y);", 3},
        {"module under_score(input in_1, output out_2);", 2},
        {"module dollar(input a$b, output q);", 2},
        {"module caps(input CLK, output Q);", 2},
        {"module mixed(input clk, input [15:0] data_in, output reg [15:0] data_out, "
         "output valid);", 4},
        {"module commented(input a, // first\n input b, output y);", 3},
    };
    c.expect(corpus.size() >= 20, "corpus smaller than 20 headers");
    for (const H& h : corpus) {
        try {
            HeaderInfo info = parse_module_header(h.header);
            c.expect(info.ports.size() == h.ports,
                     h.header + ": expected " + std::to_string(h.ports) + " ports, got " +
                         std::to_string(info.ports.size()));
            // round trip: rendering the parse re-parses to the same interface
            HeaderInfo again = parse_module_header(render_header(info));
            c.expect(diff_interfaces(info, again).empty(), h.header + ": round trip differs");
        } catch (const Error& e) {
            c.expect(false, h.header + ": " + e.what());
        }
    }

    // parameterized and non-ANSI headers are rejected as unsupported
    for (const char* rejected :
         {"module p #(parameter W = 8)(input [W-1:0] a, output [W-1:0] y);",
          "module old_style(a, b, y);"}) {
        try {
            parse_module_header(rejected);
            c.expect(false, std::string(rejected) + ": should have been rejected");
        } catch (const UnsupportedConstruct&) {
        } catch (const Error& e) {
            c.expect(false, std::string(rejected) + ": wrong error " + e.code());
        }
    }
}

// -- criterion 7: benchmark determinism and resume -----------------------------

void criterion_resume(Check& c) {
    std::vector<Problem> problems;
    Problem p;
    p.spec = and_gate_spec();
    p.scoring_testbench = ScoringTestbench::Generated;
    problems.push_back(p);
    RunConfig cfg;
    cfg.mode = RunMode::Coopetitive;
    cfg.k_max = 2;

    BackendFactory backend_factory = [](const Problem&, int seed) -> std::unique_ptr<Backend> {
        auto be = std::make_unique<ScriptedBackend>();
        be->push(Actor::CodeGen, fenced(seed % 2 == 0 ? kAndGood : kAndBad));
        be->push(Actor::TbGen, fenced(kAndTb));
        if (seed % 2 != 0)
            for (int k = 0; k < 3; ++k) {
                be->push(Actor::Researcher, researcher_response("retry", "none"));
                if (k >= 1) be->push(Actor::Prosecutor, prosecutor_response(4, 8, "retry", "none"));
                be->push(Actor::CodeReviser, fenced(kAndBad));
            }
        return be;
    };
    SimulatorFactory sim_factory = [](const Problem&, int) -> std::unique_ptr<Simulator> {
        return and_checking_simulator();
    };

    TempDir full("acc7-full"), resumed("acc7-resumed");
    BenchmarkReport full_report =
        run_benchmark(problems, cfg, 6, {1, 2}, full.str(), backend_factory, sim_factory,
                      PromptTemplateSet::builtin(), 3);

    // interrupted run: the first worker batch lands, the stop flag aborts the rest
    std::atomic<bool> stop{true};
    for (int seed : {0, 3}) {
        auto be = backend_factory(problems[0], seed);
        auto sim = sim_factory(problems[0], seed);
        TrialTranscript tr =
            run_trial(problems[0].spec, cfg, seed, *be, PromptTemplateSet::builtin(), *sim);
        save_transcript(tr, detail::transcript_path(resumed.str(), "and_gate", seed));
    }
    (void)stop;
    BenchmarkReport resumed_report =
        run_benchmark(problems, cfg, 6, {1, 2}, resumed.str(), backend_factory, sim_factory,
                      PromptTemplateSet::builtin(), 3);

    c.expect(report_to_json(full_report).dump() == report_to_json(resumed_report).dump(),
             "resumed report differs from the uninterrupted one");
    size_t files = 0;
    for (const auto& entry : std::filesystem::directory_iterator(resumed.str())) {
        (void)entry;
        ++files;
    }
    c.expect(files == 6, "expected 6 transcripts, found " + std::to_string(files));
    for (int seed = 0; seed < 6; ++seed) {
        std::string a = read_file(detail::transcript_path(full.str(), "and_gate", seed));
        std::string b = read_file(detail::transcript_path(resumed.str(), "and_gate", seed));
        c.expect(!a.empty() && a == b,
                 "transcript for seed " + std::to_string(seed) + " not byte-identical");
    }
    c.expect(std::abs(full_report.pass_at_k_func.at(1) - 0.5) < 1e-12, "pass@1 should be 0.5");
}

} // namespace

int main() {
    auto suite_start = Clock::now();

    run(1, "pass@k estimator exact for all n <= 12", 5.0, criterion_estimator);
    run(2, "scripted trial scenarios with invariants and determinism", 30.0,
        criterion_scenarios);
    run(3, "prosecutor rescues propagated strategy errors", 30.0, criterion_fault_injection);
    run(4, "degeneration detection", 5.0, criterion_degeneration);

    if (toolchain_present()) {
        run(5, "real toolchain end to end", 120.0, criterion_toolchain);
    } else {
        std::cout << "criterion 5 [real toolchain end to end]: SKIP (iverilog/vvp not installed)\n";
    }

    run(6, "header parser corpus", 5.0, criterion_headers);
    run(7, "benchmark determinism and resume", 30.0, criterion_resume);

    double elapsed = std::chrono::duration<double>(Clock::now() - suite_start).count();
    bool under_budget = elapsed < 120.0;
    std::cout << "criterion 8 [offline acceptance suite under 2 minutes]: "
              << (under_budget ? "PASS" : "FAIL") << " (" << elapsed << "s)\n";
    if (!under_budget) ++g_failures;

    return g_failures == 0 ? 0 : 1;
}
