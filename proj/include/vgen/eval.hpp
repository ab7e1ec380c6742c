#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "vgen/domain.hpp"
#include "vgen/errors.hpp"
#include "vgen/orchestrator.hpp"
#include "vgen/sim.hpp"
#include "vgen/transcript.hpp"

namespace vgen {

// ---------------------------------------------------------------------------
// pass@k (unbiased estimator)
// ---------------------------------------------------------------------------

// 1 - C(n-c, k)/C(n, k) in the numerically stable product form
// 1 - prod_{i=0}^{k-1} (n-c-i)/(n-i); the product is 0 when n-c < k.
inline double pass_at_k(int n, int c, int k) {
    if (c < 0 || c > n) throw DomainError("pass_at_k requires 0 <= c <= n");
    if (k < 1 || k > n) throw DomainError("pass_at_k requires 1 <= k <= n");
    if (n - c < k) return 1.0;
    double prod = 1.0;
    for (int i = 0; i < k; ++i)
        prod *= static_cast<double>(n - c - i) / static_cast<double>(n - i);
    return 1.0 - prod;
}

// ---------------------------------------------------------------------------
// Problems
// ---------------------------------------------------------------------------

enum class ScoringTestbench { Generated, Reference };

struct Problem {
    ModuleSpec spec;
    std::string source_benchmark = "native";
    ScoringTestbench scoring_testbench = ScoringTestbench::Generated;
};

namespace detail {

inline Problem problem_from_fields(const nlohmann::json& j, const std::string& where) {
    Problem p;
    for (const char* field : {"problem_id", "description", "header"})
        if (!j.contains(field))
            throw ParseError(where + ": missing field '" + std::string(field) + "'");
    p.spec.problem_id = j["problem_id"].get<std::string>();
    p.spec.description = j["description"].get<std::string>();
    p.spec.header = j["header"].get<std::string>();
    if (j.contains("reference_solution"))
        p.spec.reference_solution = j["reference_solution"].get<std::string>();
    if (j.contains("reference_testbench"))
        p.spec.reference_testbench = j["reference_testbench"].get<std::string>();
    if (j.contains("source_benchmark")) p.source_benchmark = j["source_benchmark"];
    if (j.contains("scoring_testbench")) {
        std::string s = j["scoring_testbench"];
        if (s == "generated") p.scoring_testbench = ScoringTestbench::Generated;
        else if (s == "reference") p.scoring_testbench = ScoringTestbench::Reference;
        else throw ParseError(where + ": unknown scoring_testbench '" + s + "'");
    } else if (p.spec.reference_testbench) {
        p.scoring_testbench = ScoringTestbench::Reference;
    }
    if (p.scoring_testbench == ScoringTestbench::Reference && !p.spec.reference_testbench)
        throw ParseError(where + ": scoring_testbench=reference without a reference_testbench");
    if (p.spec.problem_id.empty()) throw ParseError(where + ": empty problem_id");
    parse_module_header(p.spec.header); // fails loudly on a bad header
    return p;
}

inline nlohmann::json load_mapping(const std::string& mapping_path) {
    std::ifstream in(mapping_path);
    if (!in) throw MappingError("cannot open mapping file '" + mapping_path + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw MappingError("mapping file '" + mapping_path + "': " + e.what());
    }
}

} // namespace detail

// Native format: line-delimited JSON with problem_id/description/header and
// optional reference_solution/reference_testbench/source_benchmark/
// scoring_testbench.
//
// Adapter formats map external layouts onto ModuleSpec through a field
// mapping file (JSON object external-name per our field name):
//   verilogeval-jsonl : one JSON object per line, mapping gives source keys
//   rtllm-dir         : one subdirectory per problem, mapping gives filenames
inline std::vector<Problem> load_problems(const std::string& path, const std::string& format_tag,
                                          const std::string& mapping_path = "") {
    std::vector<Problem> problems;

    auto check_unique = [&](const Problem& p) {
        for (const Problem& q : problems)
            if (q.spec.problem_id == p.spec.problem_id)
                throw ParseError("duplicate problem_id '" + p.spec.problem_id + "'");
    };

    if (format_tag == "native" || format_tag == "verilogeval-jsonl") {
        nlohmann::json mapping;
        if (format_tag == "verilogeval-jsonl") {
            if (mapping_path.empty())
                throw MappingError("format 'verilogeval-jsonl' requires a mapping file");
            mapping = detail::load_mapping(mapping_path);
        }
        std::ifstream in(path);
        if (!in) throw ParseError("cannot open problems file '" + path + "'");
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            std::string where = path + ", line " + std::to_string(lineno);
            nlohmann::json raw;
            try {
                raw = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception& e) {
                throw ParseError(where + ": " + e.what());
            }
            nlohmann::json fields;
            if (format_tag == "native") {
                fields = raw;
            } else {
                for (auto& [ours, theirs] : mapping.items()) {
                    const std::string src = theirs.get<std::string>();
                    if (raw.contains(src)) fields[ours] = raw[src];
                    else if (ours == "problem_id" || ours == "description" || ours == "header")
                        throw MappingError(where + ": source field '" + src + "' (mapped to '" +
                                           ours + "') is missing");
                }
            }
            Problem p = detail::problem_from_fields(fields, where);
            check_unique(p);
            problems.push_back(std::move(p));
        }
    } else if (format_tag == "rtllm-dir") {
        if (mapping_path.empty()) throw MappingError("format 'rtllm-dir' requires a mapping file");
        nlohmann::json mapping = detail::load_mapping(mapping_path);
        namespace fs = std::filesystem;
        if (!fs::is_directory(path)) throw ParseError("'" + path + "' is not a directory");
        std::vector<fs::path> dirs;
        for (const auto& entry : fs::directory_iterator(path))
            if (entry.is_directory()) dirs.push_back(entry.path());
        std::sort(dirs.begin(), dirs.end());
        for (const fs::path& dir : dirs) {
            nlohmann::json fields;
            fields["problem_id"] = dir.filename().string();
            for (auto& [ours, theirs] : mapping.items()) {
                fs::path file = dir / theirs.get<std::string>();
                std::ifstream in(file);
                if (!in) {
                    if (ours == "description" || ours == "header")
                        throw MappingError(dir.string() + ": required file '" +
                                           theirs.get<std::string>() + "' (mapped to '" + ours +
                                           "') is missing");
                    continue;
                }
                std::ostringstream ss;
                ss << in.rdbuf();
                fields[ours] = ss.str();
            }
            Problem p = detail::problem_from_fields(fields, dir.string());
            check_unique(p);
            problems.push_back(std::move(p));
        }
    } else {
        throw ConfigError("unknown problems format '" + format_tag + "'");
    }
    return problems;
}

// ---------------------------------------------------------------------------
// Benchmark runner
// ---------------------------------------------------------------------------

struct ProblemResult {
    std::string problem_id;
    int n = 0;        // trials attempted
    int c = 0;        // trials passed (functional)
    int syntax_c = 0; // trials whose final compile was clean
    std::vector<std::string> transcripts;
    double wall_time_s = 0.0;
};

struct BenchmarkReport {
    std::vector<ProblemResult> results;
    std::vector<int> k_list;
    int n = 0;
    // mean over problems of pass_at_k(n, c_p, k), plus the syntax column
    std::map<int, double> pass_at_k_func;
    std::map<int, double> pass_at_k_syntax;
};

// Each trial gets its own backend so scripted queues cannot interleave
// across concurrent trials.
using BackendFactory = std::function<std::unique_ptr<Backend>(const Problem&, int seed)>;
using SimulatorFactory = std::function<std::unique_ptr<Simulator>(const Problem&, int seed)>;

namespace detail {

inline std::string transcript_path(const std::string& out_dir, const std::string& problem_id,
                                   int seed) {
    return (std::filesystem::path(out_dir) / (problem_id + "." + std::to_string(seed) + ".jsonl"))
        .string();
}

// Final functional/syntax pass bits of a persisted transcript. Functional
// pass comes from the last simulator event (rescore included); syntax pass
// means the final compile was clean (phase advanced past compile).
struct ScoredBits {
    bool func = false;
    bool syntax = false;
};

inline ScoredBits score_transcript(const TrialTranscript& tr) {
    ScoredBits bits;
    bits.func = tr.final.pass;
    for (auto it = tr.events.rbegin(); it != tr.events.rend(); ++it) {
        if (it->actor != Actor::Simulator || !it->payload.contains("phase")) continue;
        const std::string phase = it->payload["phase"].get<std::string>();
        if (phase == "timeout")
            // a run-phase timeout still compiled cleanly
            bits.syntax = it->payload.value("raw", std::string()).find("--- run stdout ---") !=
                          std::string::npos;
        else
            bits.syntax = phase != "compile";
        break;
    }
    return bits;
}

} // namespace detail

// When the problem scores against a reference testbench, the trial's final
// code is re-simulated against it so a self-generated testbench cannot
// self-certify. The rescore is appended to the transcript as a simulator
// event tagged rescore=true and final.pass is replaced by its outcome.
inline void rescore_against_reference(TrialTranscript& tr, const Problem& problem,
                                      Simulator& simulator) {
    if (problem.scoring_testbench != ScoringTestbench::Reference) return;
    // locate the final code revision
    const nlohmann::json* last_code = nullptr;
    int last_iter = 0;
    for (const TranscriptEvent& ev : tr.events) {
        if (ev.actor == Actor::CodeGen || ev.actor == Actor::CodeReviser) {
            if (ev.payload.contains("text")) {
                last_code = &ev.payload;
                last_iter = ev.payload.value("iteration", 0);
            }
        }
    }
    if (!last_code) {
        tr.final.pass = false;
        return;
    }
    VerilogSource code = VerilogSource::make((*last_code)["text"].get<std::string>(), last_iter);
    TestbenchSource ref = TestbenchSource::make(*problem.spec.reference_testbench, last_iter);
    ErrorReport report = simulator.run(code, ref);
    nlohmann::json payload = detail::report_payload(report, last_iter);
    payload["rescore"] = true;
    tr.append(Actor::Simulator, hash_hex(code.content_hash ^ (ref.content_hash * 31)), payload);
    tr.final.pass = report.pass;
}

inline BenchmarkReport run_benchmark(const std::vector<Problem>& problems, const RunConfig& cfg,
                                     int n, const std::vector<int>& k_list,
                                     const std::string& out_dir,
                                     const BackendFactory& backend_factory,
                                     const SimulatorFactory& simulator_factory,
                                     const PromptTemplateSet& templates, int jobs = 1,
                                     const std::atomic<bool>* stop_requested = nullptr) {
    if (k_list.empty()) throw ConfigError("k_list must not be empty");
    for (int k : k_list)
        if (n < k) throw ConfigError("n must be >= every k in k_list");

    std::filesystem::create_directories(out_dir);

    struct Task {
        const Problem* problem;
        int seed;
    };
    std::vector<Task> tasks;
    for (const Problem& p : problems)
        for (int seed = 0; seed < n; ++seed) {
            // resume: skip (problem, seed) pairs with a completed transcript
            std::string path = detail::transcript_path(out_dir, p.spec.problem_id, seed);
            if (std::filesystem::exists(path)) continue;
            tasks.push_back(Task{&p, seed});
        }

    std::atomic<size_t> next{0};
    auto worker = [&] {
        while (true) {
            if (stop_requested && stop_requested->load()) return;
            size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            const Task& task = tasks[i];
            std::unique_ptr<Backend> backend = backend_factory(*task.problem, task.seed);
            std::unique_ptr<Simulator> sim = simulator_factory(*task.problem, task.seed);
            TrialTranscript tr;
            try {
                tr = run_trial(task.problem->spec, cfg, task.seed, *backend, templates, *sim);
                rescore_against_reference(tr, *task.problem, *sim);
            } catch (const Error& e) {
                // partial failures are recorded, never abort the benchmark
                tr.problem_id = task.problem->spec.problem_id;
                tr.seed = task.seed;
                tr.mode = cfg.mode;
                tr.append(Actor::Simulator, "",
                          {{"iteration", 0}, {"error", e.code()}, {"message", e.what()}});
                tr.final.pass = false;
            }
            save_transcript(tr, detail::transcript_path(out_dir, task.problem->spec.problem_id,
                                                        task.seed));
        }
    };
    if (jobs <= 1 || tasks.size() <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        int nthreads = std::min<int>(jobs, static_cast<int>(tasks.size()));
        for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }

    // aggregate purely from persisted transcripts so resumed runs are
    // byte-identical to uninterrupted ones
    BenchmarkReport report;
    report.k_list = k_list;
    report.n = n;
    for (const Problem& p : problems) {
        ProblemResult pr;
        pr.problem_id = p.spec.problem_id;
        for (int seed = 0; seed < n; ++seed) {
            std::string path = detail::transcript_path(out_dir, p.spec.problem_id, seed);
            if (!std::filesystem::exists(path)) continue;
            TrialTranscript tr = load_transcript(path);
            detail::ScoredBits bits = detail::score_transcript(tr);
            ++pr.n;
            if (bits.func) ++pr.c;
            if (bits.syntax) ++pr.syntax_c;
            // relative to out_dir so reports stay location-independent
            pr.transcripts.push_back(p.spec.problem_id + "." + std::to_string(seed) + ".jsonl");
        }
        report.results.push_back(std::move(pr));
    }
    for (int k : k_list) {
        double func_sum = 0, syn_sum = 0;
        int counted = 0;
        for (const ProblemResult& pr : report.results) {
            if (pr.n < k) continue;
            func_sum += pass_at_k(pr.n, pr.c, k);
            syn_sum += pass_at_k(pr.n, pr.syntax_c, k);
            ++counted;
        }
        report.pass_at_k_func[k] = counted ? func_sum / counted : 0.0;
        report.pass_at_k_syntax[k] = counted ? syn_sum / counted : 0.0;
    }
    return report;
}

// ---------------------------------------------------------------------------
// Report emission: report.json (machine) + report.txt (human)
// ---------------------------------------------------------------------------

inline nlohmann::json report_to_json(const BenchmarkReport& report) {
    nlohmann::json j;
    j["n"] = report.n;
    j["k_list"] = report.k_list;
    nlohmann::json per = nlohmann::json::array();
    for (const ProblemResult& pr : report.results)
        per.push_back({{"problem_id", pr.problem_id},
                       {"n", pr.n},
                       {"c", pr.c},
                       {"syntax_c", pr.syntax_c},
                       {"transcripts", pr.transcripts}});
    j["problems"] = per;
    nlohmann::json agg = nlohmann::json::array();
    for (int k : report.k_list)
        agg.push_back({{"k", k},
                       {"func", report.pass_at_k_func.at(k)},
                       {"syntax", report.pass_at_k_syntax.at(k)}});
    j["pass_at_k"] = agg;
    return j;
}

inline std::string report_to_text(const BenchmarkReport& report) {
    std::ostringstream os;
    os << "benchmark report (n=" << report.n << ")\n\n";
    os << std::left << std::setw(24) << "problem" << std::setw(8) << "n" << std::setw(8) << "c"
       << std::setw(10) << "syntax_c" << "\n";
    for (const ProblemResult& pr : report.results)
        os << std::left << std::setw(24) << pr.problem_id << std::setw(8) << pr.n << std::setw(8)
           << pr.c << std::setw(10) << pr.syntax_c << "\n";
    os << "\n" << std::left << std::setw(10) << "k" << std::setw(14) << "syntax"
       << std::setw(14) << "func" << "\n";
    os << std::fixed << std::setprecision(6);
    for (int k : report.k_list)
        os << std::left << std::setw(10) << k << std::setw(14) << report.pass_at_k_syntax.at(k)
           << std::setw(14) << report.pass_at_k_func.at(k) << "\n";
    return os.str();
}

inline void write_report(const BenchmarkReport& report, const std::string& out_dir) {
    namespace fs = std::filesystem;
    {
        std::ofstream out(fs::path(out_dir) / "report.json", std::ios::trunc);
        if (!out) throw WorkdirIO("cannot write report.json in '" + out_dir + "'");
        out << report_to_json(report).dump(2) << "\n";
    }
    {
        std::ofstream out(fs::path(out_dir) / "report.txt", std::ios::trunc);
        if (!out) throw WorkdirIO("cannot write report.txt in '" + out_dir + "'");
        out << report_to_text(report);
    }
}

} // namespace vgen
