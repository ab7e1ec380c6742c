#pragma once

#include <functional>
#include <future>
#include <string>

#include "vgen/agents.hpp"
#include "vgen/backend.hpp"
#include "vgen/domain.hpp"
#include "vgen/sim.hpp"
#include "vgen/transcript.hpp"

namespace vgen {

enum class DegenerationPolicy { FlagOnly, Abort };

inline DegenerationPolicy parse_degeneration_policy(const std::string& s) {
    if (s == "flag-only") return DegenerationPolicy::FlagOnly;
    if (s == "abort") return DegenerationPolicy::Abort;
    throw ConfigError("unknown degeneration policy '" + s + "'");
}

struct RunConfig {
    RunMode mode = RunMode::Coopetitive;
    int k_max = 2;
    DegenerationPolicy degeneration_policy = DegenerationPolicy::FlagOnly;

    void validate() const {
        if (k_max < 0) throw ConfigError("k_max must be >= 0");
    }
};

// Pure routing: at k=0 (and always in cooperation-only mode) the researcher's
// strategy is forwarded directly; from k=1 on, coopetitive mode forwards the
// prosecutor's refined strategy instead.
inline CorrectionStrategy route_strategy(int k, RunMode mode, const CorrectionStrategy& s,
                                         const std::function<ProsecutorVerdict()>& prosecutor_fn) {
    if (mode == RunMode::Coopetitive && k >= 1) return prosecutor_fn().refined;
    return s;
}

namespace detail {

inline nlohmann::json source_payload(const VerilogSource& src) {
    return {{"iteration", src.iteration},
            {"content_hash", hash_hex(src.content_hash)},
            {"text", src.text}};
}

inline nlohmann::json report_payload(const ErrorReport& r, int iteration) {
    nlohmann::json entries = nlohmann::json::array();
    for (const ErrorEntry& e : r.entries) {
        nlohmann::json je = {{"file", e.file}, {"kind", to_string(e.kind)},
                             {"message", e.message}};
        if (e.line) je["line"] = *e.line;
        entries.push_back(je);
    }
    return {{"iteration", iteration},
            {"phase", to_string(r.phase)},
            {"pass", r.pass},
            {"entries", entries},
            {"raw", r.raw}};
}

inline nlohmann::json strategy_payload(const CorrectionStrategy& s) {
    return {{"iteration", s.iteration},
            {"origin", to_string(s.origin)},
            {"code_strategy", s.code_strategy},
            {"testbench_strategy", s.testbench_strategy}};
}

} // namespace detail

// Runs one complete trial: generate, verify, then up to k_max+1 correction
// rounds. Never throws past the transcript — stage errors become a terminal
// event with final.pass = false.
inline TrialTranscript run_trial(const ModuleSpec& spec, const RunConfig& cfg, int seed,
                                 Backend& backend, const PromptTemplateSet& templates,
                                 Simulator& simulator) {
    cfg.validate();
    TrialTranscript tr;
    tr.problem_id = spec.problem_id;
    tr.seed = seed;
    tr.mode = cfg.mode;

    // Agent calls (including automatic re-prompts) are logged as they happen,
    // attributed to the stage actor being executed.
    Actor current_actor = Actor::CodeGen;
    int current_iteration = 0;
    std::mutex call_mu;
    std::vector<std::pair<Actor, std::string>> pending_calls;
    AgentCallObserver observer = [&](Actor role, const std::string& digest, bool reprompt) {
        std::lock_guard lock(call_mu);
        pending_calls.emplace_back(role, digest + (reprompt ? ":reprompt" : ""));
    };
    auto last_digest = [&](Actor role) {
        std::lock_guard lock(call_mu);
        for (auto it = pending_calls.rbegin(); it != pending_calls.rend(); ++it)
            if (it->first == role) return it->second;
        return std::string();
    };
    auto clear_calls = [&] {
        std::lock_guard lock(call_mu);
        pending_calls.clear();
    };

    try {
        // step 1: generation and initial verification
        current_actor = Actor::CodeGen;
        VerilogSource code = generate_code(spec, backend, templates, observer);
        tr.append(Actor::CodeGen, last_digest(Actor::CodeGen), detail::source_payload(code));
        clear_calls();

        current_actor = Actor::TbGen;
        TestbenchSource tb = generate_testbench(spec, code, backend, templates, observer);
        tr.append(Actor::TbGen, last_digest(Actor::TbGen), detail::source_payload(tb));
        clear_calls();

        current_actor = Actor::Simulator;
        ErrorReport report = simulator.run(code, tb);
        tr.append(Actor::Simulator,
                  hash_hex(code.content_hash ^ (tb.content_hash * 31)),
                  detail::report_payload(report, 0));
        if (report.pass) {
            tr.final.pass = true;
            tr.final.iterations_used = 0;
            return tr;
        }

        std::string prior_strategy;
        for (int k = 0; k <= cfg.k_max; ++k) {
            VerilogSource prev_code = code;
            TestbenchSource prev_tb = tb;

            if (cfg.mode == RunMode::SingleAgent) {
                current_actor = Actor::CodeReviser;
                SingleAgentRevision rev =
                    revise_single_agent(spec, code, tb, report, backend, templates, observer);
                code = rev.code;
                tb = rev.tb;
                tr.append(Actor::CodeReviser, last_digest(Actor::CodeReviser),
                          detail::source_payload(code));
                tr.append(Actor::TbReviser, last_digest(Actor::CodeReviser),
                          detail::source_payload(tb));
                clear_calls();
            } else {
                current_actor = Actor::Researcher;
                CorrectionStrategy s = research(spec, code, tb, report, prior_strategy, backend,
                                                templates, observer);
                tr.append(Actor::Researcher, last_digest(Actor::Researcher),
                          detail::strategy_payload(s));
                clear_calls();

                CorrectionStrategy forwarded = s;
                if (cfg.mode == RunMode::Coopetitive && k >= 1) {
                    current_actor = Actor::Prosecutor;
                    ProsecutorVerdict verdict =
                        prosecute(spec, s, code, tb, report, backend, templates, observer);
                    nlohmann::json payload = detail::strategy_payload(verdict.refined);
                    payload["code_score"] = verdict.code_score;
                    payload["testbench_score"] = verdict.testbench_score;
                    payload["critique"] = verdict.critique;
                    payload["endorsed"] = verdict.code_score >= kEndorseThreshold &&
                                          verdict.testbench_score >= kEndorseThreshold;
                    tr.append(Actor::Prosecutor, last_digest(Actor::Prosecutor), payload);
                    clear_calls();
                    forwarded = verdict.refined;
                }
                prior_strategy = "CODE_STRATEGY: " + forwarded.code_strategy +
                                 "\nTESTBENCH_STRATEGY: " + forwarded.testbench_strategy;

                // dual revision; testbench revision runs on its own thread,
                // transcript order stays canonical (code before testbench)
                current_actor = Actor::CodeReviser;
                auto tb_future = std::async(std::launch::async, [&] {
                    return revise_testbench(spec, code, tb, report,
                                            forwarded.testbench_strategy, backend, templates,
                                            observer);
                });
                VerilogSource new_code;
                std::exception_ptr code_err;
                try {
                    new_code = revise_code(spec, code, tb, report, forwarded.code_strategy,
                                           backend, templates, observer);
                } catch (...) {
                    code_err = std::current_exception();
                }
                TestbenchSource new_tb;
                std::exception_ptr tb_err;
                try {
                    new_tb = tb_future.get();
                } catch (...) {
                    tb_err = std::current_exception();
                }
                if (code_err) { current_actor = Actor::CodeReviser; std::rethrow_exception(code_err); }
                if (tb_err) { current_actor = Actor::TbReviser; std::rethrow_exception(tb_err); }
                code = new_code;
                tb = new_tb;
                tr.append(Actor::CodeReviser, last_digest(Actor::CodeReviser),
                          detail::source_payload(code));
                tr.append(Actor::TbReviser, last_digest(Actor::TbReviser),
                          detail::source_payload(tb));
                clear_calls();
            }

            current_actor = Actor::Simulator;
            report = simulator.run(code, tb);
            tr.append(Actor::Simulator,
                      hash_hex(code.content_hash ^ (tb.content_hash * 31)),
                      detail::report_payload(report, k + 1));
            tr.final.iterations_used = k + 1;

            if (report.pass) {
                tr.final.pass = true;
                return tr;
            }

            // degeneration: identical code re-submitted without passing
            if (code.content_hash == prev_code.content_hash) {
                tr.final.degeneration_flagged = true;
                if (cfg.degeneration_policy == DegenerationPolicy::Abort) return tr;
            }
            (void)prev_tb;
        }
    } catch (const Error& e) {
        // terminal error event carries the running max iteration so the
        // monotone-iteration invariant holds
        int max_iter = current_iteration;
        for (const TranscriptEvent& ev : tr.events)
            if (ev.payload.contains("iteration"))
                max_iter = std::max(max_iter, ev.payload["iteration"].get<int>());
        tr.append(current_actor, "",
                  {{"iteration", max_iter},
                   {"error", e.code()},
                   {"message", e.what()}});
        tr.final.pass = false;
    }
    return tr;
}

} // namespace vgen
