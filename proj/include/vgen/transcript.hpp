#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vgen/domain.hpp"
#include "vgen/errors.hpp"

namespace vgen {

enum class RunMode { Coopetitive, CooperationOnly, SingleAgent };

inline const char* to_string(RunMode m) {
    switch (m) {
        case RunMode::Coopetitive: return "coopetitive";
        case RunMode::CooperationOnly: return "cooperation-only";
        case RunMode::SingleAgent: return "single-agent";
    }
    return "?";
}

inline RunMode parse_run_mode(const std::string& s) {
    if (s == "coopetitive") return RunMode::Coopetitive;
    if (s == "cooperation-only") return RunMode::CooperationOnly;
    if (s == "single-agent") return RunMode::SingleAgent;
    throw ConfigError("unknown mode '" + s + "'");
}

enum class Actor { CodeGen, TbGen, Researcher, Prosecutor, CodeReviser, TbReviser, Simulator };

inline const char* to_string(Actor a) {
    switch (a) {
        case Actor::CodeGen: return "code_gen";
        case Actor::TbGen: return "tb_gen";
        case Actor::Researcher: return "researcher";
        case Actor::Prosecutor: return "prosecutor";
        case Actor::CodeReviser: return "code_reviser";
        case Actor::TbReviser: return "tb_reviser";
        case Actor::Simulator: return "simulator";
    }
    return "?";
}

inline Actor parse_actor(const std::string& s) {
    if (s == "code_gen") return Actor::CodeGen;
    if (s == "tb_gen") return Actor::TbGen;
    if (s == "researcher") return Actor::Researcher;
    if (s == "prosecutor") return Actor::Prosecutor;
    if (s == "code_reviser") return Actor::CodeReviser;
    if (s == "tb_reviser") return Actor::TbReviser;
    if (s == "simulator") return Actor::Simulator;
    throw ParseError("unknown actor '" + s + "'");
}

// One logged step of a trial. `t` is a logical tick (0,1,2,...), not wall
// time, so that transcripts with the same seed are byte-identical.
struct TranscriptEvent {
    int t = 0;
    Actor actor = Actor::CodeGen;
    std::string input_digest; // 16-hex-char FNV digest of the step's inputs
    nlohmann::json payload;   // actor-specific; always has "iteration"
};

struct TrialFinal {
    bool pass = false;
    int iterations_used = 0;
    bool degeneration_flagged = false;
};

struct TrialTranscript {
    std::string problem_id;
    int seed = 0;
    RunMode mode = RunMode::Coopetitive;
    std::vector<TranscriptEvent> events;
    TrialFinal final;

    int next_tick() const { return static_cast<int>(events.size()); }

    TranscriptEvent& append(Actor actor, std::string input_digest, nlohmann::json payload) {
        events.push_back(TranscriptEvent{next_tick(), actor, std::move(input_digest),
                                         std::move(payload)});
        return events.back();
    }
};

// ---------------------------------------------------------------------------
// JSONL serialization: meta line, one line per event, final line.
// nlohmann::json orders keys alphabetically, which keeps bytes stable.
// ---------------------------------------------------------------------------

inline std::string to_jsonl(const TrialTranscript& tr) {
    std::string out;
    nlohmann::json meta = {{"type", "meta"},
                           {"problem_id", tr.problem_id},
                           {"seed", tr.seed},
                           {"mode", to_string(tr.mode)}};
    out += meta.dump();
    out += '\n';
    for (const TranscriptEvent& ev : tr.events) {
        nlohmann::json line = {{"type", "event"},
                               {"t", ev.t},
                               {"actor", to_string(ev.actor)},
                               {"input_digest", ev.input_digest},
                               {"payload", ev.payload}};
        out += line.dump();
        out += '\n';
    }
    nlohmann::json fin = {{"type", "final"},
                          {"pass", tr.final.pass},
                          {"iterations_used", tr.final.iterations_used},
                          {"degeneration_flagged", tr.final.degeneration_flagged}};
    out += fin.dump();
    out += '\n';
    return out;
}

inline TrialTranscript transcript_from_jsonl(const std::string& text) {
    TrialTranscript tr;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    bool saw_meta = false, saw_final = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
        }
        const std::string type = j.value("type", "");
        if (type == "meta") {
            tr.problem_id = j.at("problem_id").get<std::string>();
            tr.seed = j.at("seed").get<int>();
            tr.mode = parse_run_mode(j.at("mode").get<std::string>());
            saw_meta = true;
        } else if (type == "event") {
            TranscriptEvent ev;
            ev.t = j.at("t").get<int>();
            ev.actor = parse_actor(j.at("actor").get<std::string>());
            ev.input_digest = j.at("input_digest").get<std::string>();
            ev.payload = j.at("payload");
            tr.events.push_back(std::move(ev));
        } else if (type == "final") {
            tr.final.pass = j.at("pass").get<bool>();
            tr.final.iterations_used = j.at("iterations_used").get<int>();
            tr.final.degeneration_flagged = j.at("degeneration_flagged").get<bool>();
            saw_final = true;
        } else {
            throw ParseError("line " + std::to_string(lineno) + ": unknown record type '" +
                             type + "'");
        }
    }
    if (!saw_meta) throw ParseError("transcript missing meta record");
    if (!saw_final) throw ParseError("transcript truncated: missing final record (after line " +
                                     std::to_string(lineno) + ")");
    return tr;
}

inline void save_transcript(const TrialTranscript& tr, const std::string& path) {
    // write-then-rename so a partially written file never looks complete
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw WorkdirIO("cannot open '" + tmp + "' for writing");
        out << to_jsonl(tr);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw WorkdirIO("cannot rename '" + tmp + "' to '" + path + "'");
}

inline TrialTranscript load_transcript(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open transcript '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return transcript_from_jsonl(ss.str());
}

// ---------------------------------------------------------------------------
// State-machine invariants (checked in tests and by `replay --verify`).
// Returns violation descriptions; empty means conformant.
// ---------------------------------------------------------------------------

inline std::vector<std::string> check_invariants(const TrialTranscript& tr, int k_max) {
    std::vector<std::string> bad;
    auto is_rescore = [](const TranscriptEvent& ev) {
        return ev.payload.value("rescore", false);
    };

    // strict event ordering by logical tick
    for (size_t i = 0; i < tr.events.size(); ++i)
        if (tr.events[i].t != static_cast<int>(i)) {
            bad.push_back("event ticks not strictly ordered at index " + std::to_string(i));
            break;
        }

    // first agent event is code_gen
    for (const TranscriptEvent& ev : tr.events) {
        if (ev.actor == Actor::Simulator) continue;
        if (ev.actor != Actor::CodeGen)
            bad.push_back(std::string("first agent event is ") + to_string(ev.actor) +
                          ", expected code_gen");
        break;
    }

    // prosecutor exclusion: never in cooperation-only / single-agent; never at k=0
    for (const TranscriptEvent& ev : tr.events) {
        if (ev.actor != Actor::Prosecutor) continue;
        if (tr.mode != RunMode::Coopetitive)
            bad.push_back("prosecutor event in mode " + std::string(to_string(tr.mode)));
        if (ev.payload.value("iteration", -1) < 1)
            bad.push_back("prosecutor event at iteration " +
                          std::to_string(ev.payload.value("iteration", -1)));
    }

    // simulator budget: initial + one per correction round (rescores exempt)
    int sim_events = 0;
    for (const TranscriptEvent& ev : tr.events)
        if (ev.actor == Actor::Simulator && !is_rescore(ev)) ++sim_events;
    if (sim_events > k_max + 2)
        bad.push_back("simulator invoked " + std::to_string(sim_events) + " times, budget " +
                      std::to_string(k_max + 2));

    // pass-terminality
    bool passed = false;
    for (const TranscriptEvent& ev : tr.events) {
        if (passed && !is_rescore(ev))
            bad.push_back("event at t=" + std::to_string(ev.t) +
                          " follows a passing simulator event");
        if (ev.actor == Actor::Simulator && !is_rescore(ev) && ev.payload.value("pass", false))
            passed = true;
    }

    // monotone iteration indices, bounded by k_max + 1
    int prev_iter = -1;
    for (const TranscriptEvent& ev : tr.events) {
        if (!ev.payload.contains("iteration")) continue;
        int it = ev.payload["iteration"].get<int>();
        if (it < prev_iter)
            bad.push_back("iteration decreased to " + std::to_string(it) + " at t=" +
                          std::to_string(ev.t));
        if (it > k_max + 1)
            bad.push_back("iteration " + std::to_string(it) + " exceeds bound " +
                          std::to_string(k_max + 1));
        prev_iter = std::max(prev_iter, it);
    }

    // every simulator event preceded in the same iteration by revision/generation
    for (size_t i = 0; i < tr.events.size(); ++i) {
        const TranscriptEvent& ev = tr.events[i];
        if (ev.actor != Actor::Simulator || is_rescore(ev)) continue;
        int it = ev.payload.value("iteration", 0);
        bool produced = false;
        for (size_t j = 0; j < i; ++j) {
            const TranscriptEvent& p = tr.events[j];
            if (p.actor == Actor::Simulator) continue;
            if ((p.actor == Actor::CodeGen || p.actor == Actor::CodeReviser) &&
                p.payload.value("iteration", -1) == it)
                produced = true;
        }
        if (!produced)
            bad.push_back("simulator event at t=" + std::to_string(ev.t) +
                          " has no generation/revision event for iteration " +
                          std::to_string(it));
    }

    return bad;
}

} // namespace vgen
