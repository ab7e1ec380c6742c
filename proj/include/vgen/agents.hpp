#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vgen/backend.hpp"
#include "vgen/domain.hpp"
#include "vgen/errors.hpp"

namespace vgen {

// ---------------------------------------------------------------------------
// Prompt templates
// ---------------------------------------------------------------------------

struct PromptTemplate {
    std::string system;        // per-role system prompt
    std::string user_skeleton; // {placeholder} syntax
};

// Template roles: the six agent roles plus "single", used by single-agent
// mode for the combined revise-everything step.
struct PromptTemplateSet {
    std::map<std::string, PromptTemplate> by_role;

    const PromptTemplate& get(const std::string& role) const {
        auto it = by_role.find(role);
        if (it == by_role.end()) throw ConfigError("no prompt template for role '" + role + "'");
        return it->second;
    }

    // Directory layout: <dir>/<role>.txt, system prompt and user skeleton
    // separated by a line containing only "---".
    static PromptTemplateSet load_dir(const std::string& dir) {
        PromptTemplateSet set;
        static const char* roles[] = {"code_gen",  "tb_gen",      "researcher", "prosecutor",
                                      "code_reviser", "tb_reviser", "single"};
        for (const char* role : roles) {
            std::filesystem::path p = std::filesystem::path(dir) / (std::string(role) + ".txt");
            std::ifstream in(p);
            if (!in) throw ConfigError("missing template file '" + p.string() + "'");
            std::string line, system, user;
            bool past_sep = false;
            while (std::getline(in, line)) {
                if (!past_sep && line == "---") { past_sep = true; continue; }
                (past_sep ? user : system) += line + "\n";
            }
            if (!past_sep)
                throw ConfigError("template '" + p.string() + "' lacks the '---' separator");
            set.by_role[role] = PromptTemplate{system, user};
        }
        return set;
    }

    static PromptTemplateSet builtin();
};

// Substitutes {name} placeholders from `vars`. Unresolved placeholders are an
// error; substituted values are never rescanned, so Verilog braces in values
// pass through untouched.
inline std::string render_template(const std::string& skeleton,
                                   const std::map<std::string, std::string>& vars) {
    std::string out;
    out.reserve(skeleton.size());
    size_t i = 0;
    while (i < skeleton.size()) {
        char c = skeleton[i];
        if (c == '{') {
            size_t j = i + 1;
            while (j < skeleton.size() &&
                   (std::islower(static_cast<unsigned char>(skeleton[j])) || skeleton[j] == '_'))
                ++j;
            if (j < skeleton.size() && skeleton[j] == '}' && j > i + 1) {
                std::string name = skeleton.substr(i + 1, j - i - 1);
                auto it = vars.find(name);
                if (it == vars.end())
                    throw UnboundPlaceholder("placeholder {" + name + "} is not bound");
                out += it->second;
                i = j + 1;
                continue;
            }
        }
        out += c;
        ++i;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Response parsing
// ---------------------------------------------------------------------------

// First fenced block whose content mentions "module"; falls back to the
// widest module...endmodule region in a bare completion.
inline std::string extract_code_block(const std::string& text) {
    size_t pos = 0;
    while (true) {
        size_t open = text.find("```", pos);
        if (open == std::string::npos) break;
        size_t body_start = text.find('\n', open);
        if (body_start == std::string::npos) break;
        ++body_start;
        size_t close = text.find("```", body_start);
        if (close == std::string::npos) break;
        std::string body = text.substr(body_start, close - body_start);
        if (body.find("module") != std::string::npos) {
            while (!body.empty() && (body.back() == '\n' || body.back() == ' ')) body.pop_back();
            return body;
        }
        pos = close + 3;
    }
    size_t first = text.find("module");
    size_t last = text.rfind("endmodule");
    if (first != std::string::npos && last != std::string::npos && last > first)
        return text.substr(first, last + 9 - first);
    throw NoCodeBlock("response contains no extractable Verilog source");
}

// Splits a response into uppercase tagged sections (e.g. "CODE_STRATEGY:").
// A tag owns everything until the next known tag. Total over any input:
// succeeds or throws MissingSection, never a silent partial result.
inline std::map<std::string, std::string> parse_tagged_sections(
    const std::string& text, const std::vector<std::string>& tags) {
    std::map<std::string, std::string> out;
    struct Hit { size_t pos; size_t content_start; std::string tag; };
    std::vector<Hit> hits;
    std::istringstream in(text);
    std::string line;
    size_t offset = 0;
    while (std::getline(in, line)) {
        std::string trimmed = line;
        size_t lead = trimmed.find_first_not_of(" \t*#>");
        if (lead != std::string::npos) trimmed = trimmed.substr(lead);
        else trimmed.clear();
        for (const std::string& tag : tags) {
            if (trimmed.rfind(tag, 0) == 0) {
                size_t after = trimmed.find_first_not_of(" \t", tag.size());
                bool colon = after != std::string::npos && trimmed[after] == ':';
                if (colon) {
                    size_t content = offset + (line.size() - trimmed.size()) + after + 1;
                    hits.push_back(Hit{offset, content, tag});
                }
                break;
            }
        }
        offset += line.size() + 1;
    }
    for (size_t i = 0; i < hits.size(); ++i) {
        size_t end = (i + 1 < hits.size()) ? hits[i + 1].pos : text.size();
        size_t start = std::min(hits[i].content_start, end);
        std::string body = text.substr(start, end - start);
        size_t b = body.find_first_not_of(" \t\n");
        size_t e = body.find_last_not_of(" \t\n");
        out[hits[i].tag] = (b == std::string::npos) ? "" : body.substr(b, e - b + 1);
    }
    for (const std::string& tag : tags)
        if (!out.count(tag)) throw MissingSection("section '" + tag + "' not found in response");
    return out;
}

inline bool has_verdict_protocol(const std::string& tb_text) {
    // the testbench must print "RESULT: PASSED=<n> FAILED=<n>"
    return tb_text.find("RESULT: PASSED=") != std::string::npos &&
           tb_text.find("FAILED=") != std::string::npos;
}

// ---------------------------------------------------------------------------
// Rendering helpers shared by the agent operations
// ---------------------------------------------------------------------------

inline std::string format_error_report(const ErrorReport& report) {
    std::ostringstream os;
    os << "phase: " << to_string(report.phase) << "\n";
    for (const ErrorEntry& e : report.entries) {
        os << "- [" << to_string(e.kind) << "] ";
        if (!e.file.empty()) {
            os << e.file;
            if (e.line) os << ":" << *e.line;
            os << ": ";
        }
        os << e.message << "\n";
    }
    if (!report.raw.empty()) os << "tool output:\n" << report.raw << "\n";
    return os.str();
}

// Observer invoked once per agent call, used by the orchestrator to log
// transcript events (including automatic re-prompts).
using AgentCallObserver =
    std::function<void(Actor role, const std::string& request_digest_hex, bool reprompt)>;

namespace detail {

inline ChatRequest build_request(Actor role, const PromptTemplate& tpl,
                                 const std::map<std::string, std::string>& vars) {
    ChatRequest req;
    req.role_tag = role;
    req.messages.push_back(ChatMessage{"system", tpl.system});
    req.messages.push_back(ChatMessage{"user", render_template(tpl.user_skeleton, vars)});
    return req;
}

inline std::string call(Backend& backend, const ChatRequest& req,
                        const AgentCallObserver& observer, bool reprompt = false) {
    if (observer) observer(req.role_tag, request_digest(req), reprompt);
    return backend.complete(req).content;
}

inline bool strategy_is_noop(const std::string& s) {
    std::string t;
    for (char c : s)
        if (!std::isspace(static_cast<unsigned char>(c)))
            t += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return t.empty() || t == "none" || t == "none.";
}

} // namespace detail

// ---------------------------------------------------------------------------
// Agent operations
// ---------------------------------------------------------------------------

// Code generation agent: renders description+header, extracts one Verilog
// block, and verifies the module keeps the required interface.
inline VerilogSource generate_code(const ModuleSpec& spec, Backend& backend,
                                   const PromptTemplateSet& templates,
                                   const AgentCallObserver& observer = {}) {
    HeaderInfo want = parse_module_header(spec.header);
    ChatRequest req = detail::build_request(Actor::CodeGen, templates.get("code_gen"),
                                            {{"description", spec.description},
                                             {"header", spec.header}});
    std::string content = detail::call(backend, req, observer);
    std::string code = extract_code_block(content);
    HeaderInfo got = parse_module_header(code);
    std::string diff = diff_interfaces(want, got);
    if (!diff.empty())
        throw InterfaceViolation("generated module does not match the required interface:\n" +
                                 diff);
    return VerilogSource::make(code, 0);
}

// Testbench generation agent (pluggable stand-in for an external testbench
// generator). Enforces the self-checking verdict protocol, with one
// automatic re-prompt when the protocol line is missing.
inline TestbenchSource generate_testbench(const ModuleSpec& spec, const VerilogSource& code,
                                          Backend& backend, const PromptTemplateSet& templates,
                                          const AgentCallObserver& observer = {}) {
    std::map<std::string, std::string> vars = {{"description", spec.description},
                                               {"header", spec.header},
                                               {"code", code.text}};
    ChatRequest req = detail::build_request(Actor::TbGen, templates.get("tb_gen"), vars);
    std::string content = detail::call(backend, req, observer);
    std::string tb = extract_code_block(content);
    if (!has_verdict_protocol(tb)) {
        ChatRequest retry = req;
        retry.messages.push_back(ChatMessage{"assistant", content});
        retry.messages.push_back(ChatMessage{
            "user", "The testbench must finish with a $display of the exact line "
                    "\"RESULT: PASSED=<count> FAILED=<count>\". Regenerate the full testbench."});
        content = detail::call(backend, retry, observer, /*reprompt=*/true);
        tb = extract_code_block(content);
        if (!has_verdict_protocol(tb))
            throw VerdictProtocolMissing(
                "generated testbench lacks the RESULT: PASSED=/FAILED= verdict line");
    }
    return TestbenchSource::make(tb, code.iteration);
}

// Research agent: analyzes failing code+testbench+diagnostics and produces a
// dual correction strategy (CODE_STRATEGY / TESTBENCH_STRATEGY sections).
inline CorrectionStrategy research(const ModuleSpec& spec, const VerilogSource& code,
                                   const TestbenchSource& tb, const ErrorReport& errors,
                                   const std::string& prior_strategy, Backend& backend,
                                   const PromptTemplateSet& templates,
                                   const AgentCallObserver& observer = {}) {
    std::map<std::string, std::string> vars = {
        {"description", spec.description}, {"header", spec.header},
        {"code", code.text},               {"testbench", tb.text},
        {"errors", format_error_report(errors)},
        {"prior_strategy", prior_strategy.empty() ? "none" : prior_strategy}};
    ChatRequest req = detail::build_request(Actor::Researcher, templates.get("researcher"), vars);
    std::string content = detail::call(backend, req, observer);
    std::map<std::string, std::string> sections;
    try {
        sections = parse_tagged_sections(content, {"CODE_STRATEGY", "TESTBENCH_STRATEGY"});
    } catch (const MissingSection&) {
        ChatRequest retry = req;
        retry.messages.push_back(ChatMessage{"assistant", content});
        retry.messages.push_back(ChatMessage{
            "user", "Answer again using exactly two sections labelled CODE_STRATEGY: and "
                    "TESTBENCH_STRATEGY:."});
        content = detail::call(backend, retry, observer, /*reprompt=*/true);
        sections = parse_tagged_sections(content, {"CODE_STRATEGY", "TESTBENCH_STRATEGY"});
    }
    CorrectionStrategy s;
    s.code_strategy = sections["CODE_STRATEGY"];
    s.testbench_strategy = sections["TESTBENCH_STRATEGY"];
    if (detail::strategy_is_noop(s.code_strategy) && detail::strategy_is_noop(s.testbench_strategy))
        throw MissingSection("researcher produced two empty strategies");
    s.origin = StrategyOrigin::Researcher;
    s.iteration = code.iteration;
    return s;
}

// Prosecutor agent: scores the researcher's strategy 1-10 per domain and
// always emits the refined strategy that is actually forwarded. Scores at or
// above `endorse_threshold` frame the critique as an endorsement; routing is
// unaffected either way.
inline constexpr int kEndorseThreshold = 8;

inline ProsecutorVerdict prosecute(const ModuleSpec& spec, const CorrectionStrategy& strategy,
                                   const VerilogSource& code, const TestbenchSource& tb,
                                   const ErrorReport& errors, Backend& backend,
                                   const PromptTemplateSet& templates,
                                   const AgentCallObserver& observer = {}) {
    std::ostringstream strat;
    strat << "CODE_STRATEGY: " << strategy.code_strategy << "\nTESTBENCH_STRATEGY: "
          << strategy.testbench_strategy;
    std::map<std::string, std::string> vars = {
        {"description", spec.description}, {"header", spec.header},
        {"code", code.text},               {"testbench", tb.text},
        {"errors", format_error_report(errors)},
        {"strategy", strat.str()}};
    ChatRequest req = detail::build_request(Actor::Prosecutor, templates.get("prosecutor"), vars);
    std::string content = detail::call(backend, req, observer);
    static const std::vector<std::string> tags = {"CODE_SCORE", "TB_SCORE", "CRITIQUE",
                                                  "REFINED_CODE_STRATEGY",
                                                  "REFINED_TB_STRATEGY"};
    std::map<std::string, std::string> sections;
    try {
        sections = parse_tagged_sections(content, tags);
    } catch (const MissingSection&) {
        ChatRequest retry = req;
        retry.messages.push_back(ChatMessage{"assistant", content});
        retry.messages.push_back(ChatMessage{
            "user", "Answer again using exactly these sections: CODE_SCORE:, TB_SCORE:, "
                    "CRITIQUE:, REFINED_CODE_STRATEGY:, REFINED_TB_STRATEGY:."});
        content = detail::call(backend, retry, observer, /*reprompt=*/true);
        sections = parse_tagged_sections(content, tags);
    }
    auto parse_score = [](const std::string& label, const std::string& raw) {
        int v = 0;
        try {
            size_t used = 0;
            v = std::stoi(raw, &used);
        } catch (const std::exception&) {
            throw ScoreOutOfRange(label + " is not an integer: '" + raw + "'");
        }
        if (v < 1 || v > 10)
            throw ScoreOutOfRange(label + " = " + std::to_string(v) + ", expected 1..10");
        return v;
    };
    ProsecutorVerdict verdict;
    verdict.code_score = parse_score("CODE_SCORE", sections["CODE_SCORE"]);
    verdict.testbench_score = parse_score("TB_SCORE", sections["TB_SCORE"]);
    verdict.critique = sections["CRITIQUE"];
    verdict.refined.code_strategy = sections["REFINED_CODE_STRATEGY"];
    verdict.refined.testbench_strategy = sections["REFINED_TB_STRATEGY"];
    if (detail::strategy_is_noop(verdict.refined.code_strategy) &&
        detail::strategy_is_noop(verdict.refined.testbench_strategy))
        throw MissingSection("prosecutor forwarded two empty refined strategies");
    verdict.refined.origin = StrategyOrigin::Prosecutor;
    verdict.refined.iteration = strategy.iteration;
    return verdict;
}

// Code revision agent. A "none" strategy is a contract-level no-op: the code
// is carried forward unchanged (iteration bumped) with zero backend calls.
inline VerilogSource revise_code(const ModuleSpec& spec, const VerilogSource& code,
                                 const TestbenchSource& tb, const ErrorReport& errors,
                                 const std::string& strategy_text, Backend& backend,
                                 const PromptTemplateSet& templates,
                                 const AgentCallObserver& observer = {}) {
    if (detail::strategy_is_noop(strategy_text))
        return VerilogSource::make(code.text, code.iteration + 1);
    HeaderInfo want = parse_module_header(spec.header);
    std::map<std::string, std::string> vars = {
        {"description", spec.description}, {"header", spec.header},
        {"code", code.text},               {"testbench", tb.text},
        {"errors", format_error_report(errors)},
        {"strategy", strategy_text}};
    ChatRequest req = detail::build_request(Actor::CodeReviser, templates.get("code_reviser"),
                                            vars);
    std::string content = detail::call(backend, req, observer);
    std::string revised = extract_code_block(content);
    HeaderInfo got = parse_module_header(revised);
    std::string diff = diff_interfaces(want, got);
    if (!diff.empty())
        throw InterfaceViolation("revised module does not match the required interface:\n" +
                                 diff);
    return VerilogSource::make(revised, code.iteration + 1);
}

// Testbench revision agent; symmetric to revise_code, including the verdict
// protocol check with one automatic re-prompt.
inline TestbenchSource revise_testbench(const ModuleSpec& spec, const VerilogSource& code,
                                        const TestbenchSource& tb, const ErrorReport& errors,
                                        const std::string& strategy_text, Backend& backend,
                                        const PromptTemplateSet& templates,
                                        const AgentCallObserver& observer = {}) {
    if (detail::strategy_is_noop(strategy_text))
        return TestbenchSource::make(tb.text, tb.iteration + 1);
    std::map<std::string, std::string> vars = {
        {"description", spec.description}, {"header", spec.header},
        {"code", code.text},               {"testbench", tb.text},
        {"errors", format_error_report(errors)},
        {"strategy", strategy_text}};
    ChatRequest req = detail::build_request(Actor::TbReviser, templates.get("tb_reviser"), vars);
    std::string content = detail::call(backend, req, observer);
    std::string revised = extract_code_block(content);
    if (!has_verdict_protocol(revised)) {
        ChatRequest retry = req;
        retry.messages.push_back(ChatMessage{"assistant", content});
        retry.messages.push_back(ChatMessage{
            "user", "The testbench must finish with a $display of the exact line "
                    "\"RESULT: PASSED=<count> FAILED=<count>\". Regenerate the full testbench."});
        content = detail::call(backend, retry, observer, /*reprompt=*/true);
        revised = extract_code_block(content);
        if (!has_verdict_protocol(revised))
            throw VerdictProtocolMissing(
                "revised testbench lacks the RESULT: PASSED=/FAILED= verdict line");
    }
    return TestbenchSource::make(revised, tb.iteration + 1);
}

// Single-agent mode: one call fixes both artifacts (CODE and TESTBENCH
// sections, each holding a fenced Verilog block).
struct SingleAgentRevision {
    VerilogSource code;
    TestbenchSource tb;
};

inline SingleAgentRevision revise_single_agent(const ModuleSpec& spec, const VerilogSource& code,
                                               const TestbenchSource& tb,
                                               const ErrorReport& errors, Backend& backend,
                                               const PromptTemplateSet& templates,
                                               const AgentCallObserver& observer = {}) {
    HeaderInfo want = parse_module_header(spec.header);
    std::map<std::string, std::string> vars = {
        {"description", spec.description}, {"header", spec.header},
        {"code", code.text},               {"testbench", tb.text},
        {"errors", format_error_report(errors)}};
    ChatRequest req = detail::build_request(Actor::CodeReviser, templates.get("single"), vars);
    std::string content = detail::call(backend, req, observer);
    std::map<std::string, std::string> sections =
        parse_tagged_sections(content, {"CODE", "TESTBENCH"});
    std::string new_code = extract_code_block(sections["CODE"]);
    std::string new_tb = extract_code_block(sections["TESTBENCH"]);
    HeaderInfo got = parse_module_header(new_code);
    std::string diff = diff_interfaces(want, got);
    if (!diff.empty())
        throw InterfaceViolation("revised module does not match the required interface:\n" +
                                 diff);
    if (!has_verdict_protocol(new_tb))
        throw VerdictProtocolMissing("revised testbench lacks the verdict line");
    return SingleAgentRevision{VerilogSource::make(new_code, code.iteration + 1),
                               TestbenchSource::make(new_tb, tb.iteration + 1)};
}

// ---------------------------------------------------------------------------
// Built-in prompt templates (editable copies ship under templates/).
// ---------------------------------------------------------------------------

inline PromptTemplateSet PromptTemplateSet::builtin() {
    PromptTemplateSet set;
    set.by_role["code_gen"] = PromptTemplate{
        "You are an expert Verilog RTL engineer. You write synthesizable, correct Verilog-2001. "
        "Always answer with exactly one fenced verilog code block and nothing else.\n",
        "Implement the following Verilog module.\n\nDescription:\n{description}\n\n"
        "You must use exactly this module header (same name, ports, directions, widths):\n"
        "{header}\n\nReturn the complete module in one fenced verilog block.\n"};
    set.by_role["tb_gen"] = PromptTemplate{
        "You are an expert Verilog verification engineer. You write self-checking testbenches. "
        "Always answer with exactly one fenced verilog code block and nothing else.\n",
        "Write a self-checking testbench for the module below.\n\nDescription:\n{description}\n\n"
        "Module header:\n{header}\n\nModule under test:\n{code}\n\n"
        "Requirements:\n"
        "- instantiate the module by its exact name\n"
        "- drive a meaningful set of stimuli and check every expected output\n"
        "- count passing and failing checks\n"
        "- terminate with $finish after printing exactly one line of the form:\n"
        "  RESULT: PASSED=<pass count> FAILED=<fail count>\n"
        "  (use $display(\"RESULT: PASSED=%0d FAILED=%0d\", passed, failed);)\n"};
    set.by_role["researcher"] = PromptTemplate{
        "You are a senior Verilog debugging expert. You analyze failing code and testbenches and "
        "produce precise correction strategies. Answer using exactly the requested sections.\n",
        "A Verilog module and its testbench failed verification.\n\n"
        "Description:\n{description}\n\nRequired module header:\n{header}\n\n"
        "Current module code:\n{code}\n\nCurrent testbench:\n{testbench}\n\n"
        "Verification errors:\n{errors}\n\n"
        "Previously forwarded strategy (may be 'none'):\n{prior_strategy}\n\n"
        "Analyze the failure and answer with exactly two sections:\n"
        "CODE_STRATEGY: <specific fixes to apply to the module, or 'none'>\n"
        "TESTBENCH_STRATEGY: <specific fixes to apply to the testbench, or 'none'>\n"};
    set.by_role["prosecutor"] = PromptTemplate{
        "You are a critical Verilog review expert acting as a prosecutor. You challenge proposed "
        "correction strategies, score them, and always produce the refined strategies that will "
        "actually be applied. Answer using exactly the requested sections.\n",
        "A correction strategy was proposed for a failing Verilog module and testbench.\n\n"
        "Description:\n{description}\n\nRequired module header:\n{header}\n\n"
        "Current module code:\n{code}\n\nCurrent testbench:\n{testbench}\n\n"
        "Verification errors:\n{errors}\n\nProposed strategy:\n{strategy}\n\n"
        "Score each strategy from 1 (useless) to 10 (excellent). If a strategy is flawed, your "
        "refined strategy must replace it; if it is sound, restate it and add any missing "
        "insights or edge cases. Answer with exactly these sections:\n"
        "CODE_SCORE: <1-10>\nTB_SCORE: <1-10>\nCRITIQUE: <your analysis>\n"
        "REFINED_CODE_STRATEGY: <strategy to forward, or 'none'>\n"
        "REFINED_TB_STRATEGY: <strategy to forward, or 'none'>\n"};
    set.by_role["code_reviser"] = PromptTemplate{
        "You are an expert Verilog RTL engineer. You apply correction strategies to module code "
        "only; never touch the testbench. Always answer with exactly one fenced verilog code "
        "block and nothing else.\n",
        "Fix the Verilog module below by applying the given strategy.\n\n"
        "Description:\n{description}\n\nRequired module header (must be preserved exactly):\n"
        "{header}\n\nCurrent module code:\n{code}\n\nCurrent testbench (context only):\n"
        "{testbench}\n\nVerification errors:\n{errors}\n\nCorrection strategy:\n{strategy}\n\n"
        "Return the complete corrected module in one fenced verilog block.\n"};
    set.by_role["tb_reviser"] = PromptTemplate{
        "You are an expert Verilog verification engineer. You apply correction strategies to "
        "testbenches only; never touch the module under test. Always answer with exactly one "
        "fenced verilog code block and nothing else.\n",
        "Fix the Verilog testbench below by applying the given strategy.\n\n"
        "Description:\n{description}\n\nModule header:\n{header}\n\n"
        "Module under test (context only):\n{code}\n\nCurrent testbench:\n{testbench}\n\n"
        "Verification errors:\n{errors}\n\nCorrection strategy:\n{strategy}\n\n"
        "The corrected testbench must keep the verdict line "
        "RESULT: PASSED=<count> FAILED=<count>. "
        "Return the complete corrected testbench in one fenced verilog block.\n"};
    set.by_role["single"] = PromptTemplate{
        "You are an expert Verilog engineer handling both design and verification. "
        "Answer using exactly the requested sections.\n",
        "A Verilog module and its testbench failed verification. Fix both.\n\n"
        "Description:\n{description}\n\nRequired module header (must be preserved exactly):\n"
        "{header}\n\nCurrent module code:\n{code}\n\nCurrent testbench:\n{testbench}\n\n"
        "Verification errors:\n{errors}\n\n"
        "Answer with exactly two sections, each holding one fenced verilog block:\n"
        "CODE: <the corrected module>\nTESTBENCH: <the corrected testbench, keeping the "
        "RESULT: PASSED=<count> FAILED=<count> verdict line>\n"};
    return set;
}

} // namespace vgen
