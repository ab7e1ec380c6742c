#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cerrno>
#include <chrono>
#include <sstream>
#include <csignal>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include "vgen/domain.hpp"
#include "vgen/errors.hpp"

namespace vgen {

struct SimConfig {
    std::string iverilog_path = "iverilog";
    std::string vvp_path = "vvp";
    double timeout_s = 30.0;
    bool keep_artifacts = false;
    std::string work_root; // empty: system temp dir
};

// ---------------------------------------------------------------------------
// Diagnostic parsing
// ---------------------------------------------------------------------------

// Classifies iverilog/vvp diagnostics of the "file:line: message" shape.
// Warning lines are dropped; anything unrecognized survives as kind=other.
inline std::vector<ErrorEntry> parse_compile_errors(const std::string& stderr_text) {
    std::vector<ErrorEntry> entries;
    static const std::regex diag_re(R"(^([^:\s][^:]*):(\d+):\s*(.*)$)");
    std::istringstream in(stderr_text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::smatch m;
        if (std::regex_match(line, m, diag_re)) {
            std::string msg = m[3];
            if (msg.rfind("warning:", 0) == 0 || msg.find(" warning:") != std::string::npos)
                continue;
            ErrorEntry e;
            e.file = m[1];
            e.line = std::stoi(m[2]);
            e.message = msg;
            std::string lower = msg;
            std::transform(lower.begin(), lower.end(), lower.begin(),
                           [](unsigned char c) { return std::tolower(c); });
            if (lower.find("syntax") != std::string::npos)
                e.kind = ErrorKind::Syntax;
            else if (lower.find("not a valid l-value") != std::string::npos)
                e.kind = ErrorKind::Type;
            else if (lower.find("unable to bind") != std::string::npos)
                e.kind = ErrorKind::Reference;
            else
                e.kind = ErrorKind::Other;
            entries.push_back(std::move(e));
        } else {
            ErrorEntry e;
            e.kind = ErrorKind::Other;
            e.message = line;
            entries.push_back(std::move(e));
        }
    }
    return entries;
}

struct Verdict {
    int passed = 0;
    int failed = 0;
};

// Scans simulation stdout for the last "RESULT: PASSED=<p> FAILED=<f>" line.
inline std::optional<Verdict> parse_testbench_verdict(const std::string& stdout_text) {
    static const std::regex verdict_re(R"(RESULT:\s*PASSED=(\d+)\s+FAILED=(\d+))");
    std::optional<Verdict> last;
    auto begin = std::sregex_iterator(stdout_text.begin(), stdout_text.end(), verdict_re);
    for (auto it = begin; it != std::sregex_iterator(); ++it)
        last = Verdict{std::stoi((*it)[1]), std::stoi((*it)[2])};
    return last;
}

// ---------------------------------------------------------------------------
// Subprocess execution with wall-clock timeout
// ---------------------------------------------------------------------------

namespace detail {

struct ProcResult {
    int exit_code = -1;
    bool timed_out = false;
    bool exec_failed = false; // binary not found / not executable
    std::string out;
    std::string err;
};

inline ProcResult run_process(const std::vector<std::string>& argv, const std::string& cwd,
                              double timeout_s) {
    int out_pipe[2], err_pipe[2];
    if (pipe(out_pipe) != 0 || pipe(err_pipe) != 0)
        throw WorkdirIO("pipe() failed: " + std::string(std::strerror(errno)));

    pid_t pid = fork();
    if (pid < 0) throw WorkdirIO("fork() failed: " + std::string(std::strerror(errno)));
    if (pid == 0) {
        // child: new process group so a timeout kill reaps grandchildren too
        setpgid(0, 0);
        if (!cwd.empty() && chdir(cwd.c_str()) != 0) _exit(126);
        dup2(out_pipe[1], STDOUT_FILENO);
        dup2(err_pipe[1], STDERR_FILENO);
        close(out_pipe[0]); close(out_pipe[1]);
        close(err_pipe[0]); close(err_pipe[1]);
        std::vector<char*> cargv;
        for (const std::string& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
        cargv.push_back(nullptr);
        execvp(cargv[0], cargv.data());
        _exit(127);
    }

    close(out_pipe[1]);
    close(err_pipe[1]);
    fcntl(out_pipe[0], F_SETFL, O_NONBLOCK);
    fcntl(err_pipe[0], F_SETFL, O_NONBLOCK);

    ProcResult res;
    auto deadline = std::chrono::steady_clock::now() +
                    std::chrono::milliseconds(static_cast<long>(timeout_s * 1000));
    bool out_open = true, err_open = true;
    char buf[4096];
    int status = 0;
    bool exited = false;

    while (true) {
        if (!exited) {
            pid_t r = waitpid(pid, &status, WNOHANG);
            if (r == pid) exited = true;
        }
        struct pollfd fds[2];
        nfds_t nfds = 0;
        if (out_open) fds[nfds++] = {out_pipe[0], POLLIN, 0};
        if (err_open) fds[nfds++] = {err_pipe[0], POLLIN, 0};
        if (nfds > 0) poll(fds, nfds, 50);

        auto drain = [&](int fd, bool& open_flag, std::string& sink) {
            while (open_flag) {
                ssize_t n = read(fd, buf, sizeof(buf));
                if (n > 0) sink.append(buf, static_cast<size_t>(n));
                else if (n == 0) { open_flag = false; break; }
                else break; // EAGAIN or error
            }
        };
        drain(out_pipe[0], out_open, res.out);
        drain(err_pipe[0], err_open, res.err);

        if (exited && !out_open && !err_open) break;
        if (exited) {
            // parent keeps draining until EOF; pipes close when grandchildren exit
            if (std::chrono::steady_clock::now() > deadline) break;
            continue;
        }
        if (std::chrono::steady_clock::now() > deadline) {
            res.timed_out = true;
            kill(-pid, SIGKILL);
            waitpid(pid, &status, 0);
            drain(out_pipe[0], out_open, res.out);
            drain(err_pipe[0], err_open, res.err);
            break;
        }
    }
    close(out_pipe[0]);
    close(err_pipe[0]);

    if (!res.timed_out) {
        if (WIFEXITED(status)) res.exit_code = WEXITSTATUS(status);
        else if (WIFSIGNALED(status)) res.exit_code = 128 + WTERMSIG(status);
        if (res.exit_code == 127) res.exec_failed = true;
    }
    return res;
}

inline std::filesystem::path make_work_dir(const std::string& root_hint) {
    static std::atomic<uint64_t> counter{0};
    std::filesystem::path root = root_hint.empty()
                                     ? std::filesystem::temp_directory_path()
                                     : std::filesystem::path(root_hint);
    std::error_code ec;
    std::filesystem::create_directories(root, ec);
    uint64_t id = counter.fetch_add(1);
    std::filesystem::path dir =
        root / ("vgen-sim-" + std::to_string(::getpid()) + "-" + std::to_string(id));
    if (!std::filesystem::create_directory(dir, ec) || ec)
        throw WorkdirIO("cannot create working directory '" + dir.string() + "'");
    return dir;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

// Abstract so the orchestration state machine can be tested against fixture
// reports without a toolchain installed.
class Simulator {
public:
    virtual ~Simulator() = default;
    virtual ErrorReport run(const VerilogSource& code, const TestbenchSource& tb) = 0;
};

// Compile code+testbench with iverilog, execute with vvp under a wall-clock
// timeout, and fold diagnostics plus the testbench verdict into an
// ErrorReport. Each call gets a private working directory.
inline ErrorReport simulate(const VerilogSource& code, const TestbenchSource& tb,
                            const SimConfig& cfg) {
    namespace fs = std::filesystem;
    fs::path dir = detail::make_work_dir(cfg.work_root);
    struct Cleanup {
        fs::path dir;
        bool keep;
        ~Cleanup() {
            if (!keep) {
                std::error_code ec;
                fs::remove_all(dir, ec);
            }
        }
    } cleanup{dir, cfg.keep_artifacts};

    auto write_file = [&](const char* name, const std::string& text) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw WorkdirIO("cannot write '" + (dir / name).string() + "'");
        out << text;
        if (!text.empty() && text.back() != '\n') out << '\n';
    };
    write_file("dut.v", code.text);
    write_file("tb.v", tb.text);

    ErrorReport report;

    // compile
    detail::ProcResult comp = detail::run_process(
        {cfg.iverilog_path, "-o", "sim.out", "dut.v", "tb.v"}, dir.string(), cfg.timeout_s);
    if (comp.exec_failed)
        throw SimulatorNotFound("cannot execute '" + cfg.iverilog_path + "'");
    report.raw = "--- compile stderr ---\n" + comp.err;
    if (comp.timed_out || comp.exit_code != 0) {
        report.phase = comp.timed_out ? SimPhase::Timeout : SimPhase::Compile;
        report.entries = parse_compile_errors(comp.err);
        report.pass = false;
        return report;
    }

    // run
    detail::ProcResult run = detail::run_process({cfg.vvp_path, "sim.out"}, dir.string(),
                                                 cfg.timeout_s);
    if (run.exec_failed) throw SimulatorNotFound("cannot execute '" + cfg.vvp_path + "'");
    report.raw += "--- run stdout ---\n" + run.out + "--- run stderr ---\n" + run.err;

    if (run.timed_out) {
        report.phase = SimPhase::Timeout;
        ErrorEntry e;
        e.kind = ErrorKind::Other;
        e.message = "simulation exceeded timeout of " + std::to_string(cfg.timeout_s) + " s";
        report.entries.push_back(std::move(e));
        report.pass = false;
        return report;
    }

    report.phase = SimPhase::Simulate;
    if (run.exit_code != 0) {
        report.entries = parse_compile_errors(run.err);
        if (report.entries.empty()) {
            ErrorEntry e;
            e.kind = ErrorKind::Other;
            e.message = "simulation runtime exited with code " + std::to_string(run.exit_code);
            report.entries.push_back(std::move(e));
        }
        report.pass = false;
        return report;
    }

    std::optional<Verdict> verdict = parse_testbench_verdict(run.out);
    if (!verdict) {
        ErrorEntry e;
        e.kind = ErrorKind::Mismatch;
        e.message = "no verdict emitted";
        report.entries.push_back(std::move(e));
        report.pass = false;
    } else if (verdict->failed > 0) {
        ErrorEntry e;
        e.kind = ErrorKind::Mismatch;
        e.message = "testbench checks failed: PASSED=" + std::to_string(verdict->passed) +
                    " FAILED=" + std::to_string(verdict->failed);
        report.entries.push_back(std::move(e));
        report.pass = false;
    } else {
        report.pass = true;
    }
    return report;
}

class IcarusSimulator : public Simulator {
public:
    explicit IcarusSimulator(SimConfig cfg) : cfg_(std::move(cfg)) {}

    ErrorReport run(const VerilogSource& code, const TestbenchSource& tb) override {
        return simulate(code, tb, cfg_);
    }

    const SimConfig& config() const { return cfg_; }

private:
    SimConfig cfg_;
};

// Test double: pops fixture reports FIFO.
class QueueSimulator : public Simulator {
public:
    void push(ErrorReport report) { queue_.push_back(std::move(report)); }

    ErrorReport run(const VerilogSource&, const TestbenchSource&) override {
        if (queue_.empty()) throw SimulatorNotFound("QueueSimulator exhausted");
        ErrorReport r = std::move(queue_.front());
        queue_.erase(queue_.begin());
        return r;
    }

private:
    std::vector<ErrorReport> queue_;
};

// Test double: verdict computed from the artifacts themselves.
class LambdaSimulator : public Simulator {
public:
    using Fn = std::function<ErrorReport(const VerilogSource&, const TestbenchSource&)>;
    explicit LambdaSimulator(Fn fn) : fn_(std::move(fn)) {}

    ErrorReport run(const VerilogSource& code, const TestbenchSource& tb) override {
        return fn_(code, tb);
    }

private:
    Fn fn_;
};

} // namespace vgen
