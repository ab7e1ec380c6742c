#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vgen/errors.hpp"

namespace vgen {

// ---------------------------------------------------------------------------
// Text normalization and hashing
// ---------------------------------------------------------------------------

// Strips // and /* */ comments. String literals are left intact.
inline std::string strip_comments(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    size_t i = 0;
    const size_t n = text.size();
    while (i < n) {
        char c = text[i];
        if (c == '"') {
            out += c;
            ++i;
            while (i < n) {
                out += text[i];
                if (text[i] == '"' && text[i - 1] != '\\') { ++i; break; }
                ++i;
            }
        } else if (c == '/' && i + 1 < n && text[i + 1] == '/') {
            while (i < n && text[i] != '\n') ++i;
        } else if (c == '/' && i + 1 < n && text[i + 1] == '*') {
            i += 2;
            while (i + 1 < n && !(text[i] == '*' && text[i + 1] == '/')) ++i;
            i = (i + 1 < n) ? i + 2 : n;
            out += ' '; // keep token separation across the removed comment
        } else {
            out += c;
            ++i;
        }
    }
    return out;
}

// Comment-stripped, whitespace-collapsed, trimmed form of `text`.
inline std::string normalize_text(const std::string& text) {
    std::string stripped = strip_comments(text);
    std::string out;
    out.reserve(stripped.size());
    bool in_space = true; // swallows leading whitespace
    for (char c : stripped) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            in_space = true;
        } else {
            if (in_space && !out.empty()) out += ' ';
            out += c;
            in_space = false;
        }
    }
    return out;
}

// 64-bit FNV-1a; stable across processes and platforms.
inline uint64_t fnv1a64(const std::string& data) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline uint64_t normalize_and_hash(const std::string& text) {
    return fnv1a64(normalize_text(text));
}

inline std::string hash_hex(uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

// ---------------------------------------------------------------------------
// Core value types
// ---------------------------------------------------------------------------

enum class PortDirection { Input, Output, Inout };

inline const char* to_string(PortDirection d) {
    switch (d) {
        case PortDirection::Input: return "input";
        case PortDirection::Output: return "output";
        case PortDirection::Inout: return "inout";
    }
    return "?";
}

struct Port {
    PortDirection direction = PortDirection::Input;
    int width = 1;
    std::string name;

    bool operator==(const Port&) const = default;
};

struct HeaderInfo {
    std::string module_name;
    std::vector<Port> ports;

    bool operator==(const HeaderInfo&) const = default;
};

struct ModuleSpec {
    std::string problem_id;
    std::string description;
    std::string header; // "module" through the closing ");"
    std::optional<std::string> reference_solution;
    std::optional<std::string> reference_testbench;
};

struct VerilogSource {
    std::string text;
    int iteration = 0;
    uint64_t content_hash = 0;

    static VerilogSource make(std::string text, int iteration) {
        VerilogSource s;
        s.content_hash = normalize_and_hash(text);
        s.text = std::move(text);
        s.iteration = iteration;
        return s;
    }
};

using TestbenchSource = VerilogSource;

enum class SimPhase { Compile, Elaborate, Simulate, Timeout };

inline const char* to_string(SimPhase p) {
    switch (p) {
        case SimPhase::Compile: return "compile";
        case SimPhase::Elaborate: return "elaborate";
        case SimPhase::Simulate: return "simulate";
        case SimPhase::Timeout: return "timeout";
    }
    return "?";
}

enum class ErrorKind { Syntax, Reference, Type, Mismatch, Other };

inline const char* to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::Syntax: return "syntax";
        case ErrorKind::Reference: return "reference";
        case ErrorKind::Type: return "type";
        case ErrorKind::Mismatch: return "mismatch";
        case ErrorKind::Other: return "other";
    }
    return "?";
}

struct ErrorEntry {
    std::string file;
    std::optional<int> line;
    ErrorKind kind = ErrorKind::Other;
    std::string message;
};

struct ErrorReport {
    SimPhase phase = SimPhase::Compile;
    std::vector<ErrorEntry> entries;
    std::string raw;
    bool pass = false;

    // pass = true ⟺ entries empty and phase != timeout
    bool consistent() const {
        return !pass || (entries.empty() && phase != SimPhase::Timeout);
    }
};

enum class StrategyOrigin { Researcher, Prosecutor };

inline const char* to_string(StrategyOrigin o) {
    return o == StrategyOrigin::Researcher ? "researcher" : "prosecutor";
}

struct CorrectionStrategy {
    std::string code_strategy;
    std::string testbench_strategy;
    StrategyOrigin origin = StrategyOrigin::Researcher;
    int iteration = 0;
};

struct ProsecutorVerdict {
    int code_score = 1;      // 1..10
    int testbench_score = 1; // 1..10
    std::string critique;
    CorrectionStrategy refined; // origin = prosecutor
};

// ---------------------------------------------------------------------------
// Module header parsing (ANSI port lists only)
// ---------------------------------------------------------------------------

namespace detail {

struct HeaderLexer {
    std::string text;
    size_t pos = 0;

    explicit HeaderLexer(std::string t) : text(std::move(t)) {}

    void skip_ws() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }

    bool eof() {
        skip_ws();
        return pos >= text.size();
    }

    char peek() {
        skip_ws();
        return pos < text.size() ? text[pos] : '\0';
    }

    bool accept(char c) {
        skip_ws();
        if (pos < text.size() && text[pos] == c) { ++pos; return true; }
        return false;
    }

    // Identifier or keyword; empty string when next char is not a word char.
    std::string word() {
        skip_ws();
        size_t start = pos;
        while (pos < text.size()) {
            char c = text[pos];
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$') ++pos;
            else break;
        }
        return text.substr(start, pos - start);
    }

    std::string peek_word() {
        skip_ws();
        size_t save = pos;
        std::string w = word();
        pos = save;
        return w;
    }
};

inline bool is_identifier(const std::string& s) {
    if (s.empty()) return false;
    if (!(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
    for (char c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$')) return false;
    return true;
}

// Signed integer literal only; parameters and expressions are rejected.
inline int range_bound(HeaderLexer& lex) {
    lex.skip_ws();
    size_t start = lex.pos;
    bool neg = lex.accept('-');
    std::string digits = lex.word();
    if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](char c) {
            return std::isdigit(static_cast<unsigned char>(c));
        })) {
        lex.pos = start;
        throw UnsupportedConstruct("non-literal range bound near '" +
                                   lex.text.substr(start, 24) + "'");
    }
    int v = std::stoi(digits);
    return neg ? -v : v;
}

} // namespace detail

// Parses an ANSI-style Verilog module header: module name, ordered ports with
// directions and widths. `[a:b]` maps to width |a-b|+1 for literal bounds.
// Comments anywhere in the header are permitted.
inline HeaderInfo parse_module_header(const std::string& text) {
    std::string clean = strip_comments(text);

    size_t mod = std::string::npos;
    // find the "module" keyword as a whole word
    for (size_t i = 0; i + 6 <= clean.size(); ++i) {
        if (clean.compare(i, 6, "module") != 0) continue;
        bool left_ok = (i == 0) || !(std::isalnum(static_cast<unsigned char>(clean[i - 1])) ||
                                     clean[i - 1] == '_');
        bool right_ok = (i + 6 == clean.size()) ||
                        !(std::isalnum(static_cast<unsigned char>(clean[i + 6])) ||
                          clean[i + 6] == '_');
        if (left_ok && right_ok) { mod = i; break; }
    }
    if (mod == std::string::npos) throw MalformedHeader("no 'module' keyword found");

    detail::HeaderLexer lex(clean.substr(mod + 6));
    HeaderInfo info;
    info.module_name = lex.word();
    if (!detail::is_identifier(info.module_name))
        throw MalformedHeader("missing or invalid module name");

    if (lex.peek() == '#')
        throw UnsupportedConstruct("parameterized module header (#(...)) is not supported");

    if (!lex.accept('('))
        throw MalformedHeader("expected '(' after module name");

    if (lex.accept(')')) {
        if (!lex.accept(';')) throw MalformedHeader("expected ';' after port list");
        return info;
    }

    std::optional<PortDirection> current_dir;
    int current_width = 1;
    while (true) {
        std::string w = lex.peek_word();
        if (w == "input" || w == "output" || w == "inout") {
            lex.word();
            current_dir = w == "input" ? PortDirection::Input
                        : w == "output" ? PortDirection::Output
                                        : PortDirection::Inout;
            current_width = 1;
            w = lex.peek_word();
            // net/variable type keywords between direction and range
            while (w == "wire" || w == "reg" || w == "logic" || w == "signed" ||
                   w == "unsigned") {
                lex.word();
                w = lex.peek_word();
            }
            if (lex.peek() == '[') {
                lex.accept('[');
                int hi = detail::range_bound(lex);
                if (!lex.accept(':')) throw MalformedHeader("expected ':' in port range");
                int lo = detail::range_bound(lex);
                if (!lex.accept(']')) throw MalformedHeader("expected ']' in port range");
                current_width = std::abs(hi - lo) + 1;
            }
        } else if (!current_dir) {
            throw UnsupportedConstruct(
                "non-ANSI port list (port '" + w + "' has no direction)");
        }

        std::string name = lex.word();
        if (!detail::is_identifier(name))
            throw MalformedHeader("expected port name, got '" + name + "'");
        for (const Port& p : info.ports)
            if (p.name == name) throw MalformedHeader("duplicate port name '" + name + "'");
        info.ports.push_back(Port{*current_dir, current_width, name});

        if (lex.accept(',')) continue;
        if (lex.accept(')')) break;
        throw MalformedHeader("expected ',' or ')' in port list near '" + lex.peek_word() + "'");
    }
    if (!lex.accept(';')) throw MalformedHeader("expected ';' after port list");
    return info;
}

// Canonical ANSI rendering; parse_module_header(render_header(h)) == h.
inline std::string render_header(const HeaderInfo& info) {
    std::ostringstream os;
    os << "module " << info.module_name << "(";
    for (size_t i = 0; i < info.ports.size(); ++i) {
        const Port& p = info.ports[i];
        if (i) os << ", ";
        os << to_string(p.direction);
        if (p.width > 1) os << " [" << (p.width - 1) << ":0]";
        os << " " << p.name;
    }
    os << ");";
    return os.str();
}

// Order-insensitive interface comparison; returns a human-readable diff,
// empty when the interfaces match.
inline std::string diff_interfaces(const HeaderInfo& expected, const HeaderInfo& actual) {
    std::ostringstream diff;
    if (expected.module_name != actual.module_name)
        diff << "module name: expected '" << expected.module_name << "', got '"
             << actual.module_name << "'\n";
    for (const Port& ep : expected.ports) {
        const Port* found = nullptr;
        for (const Port& ap : actual.ports)
            if (ap.name == ep.name) { found = &ap; break; }
        if (!found) {
            diff << "missing port '" << ep.name << "'\n";
        } else {
            if (found->direction != ep.direction)
                diff << "port '" << ep.name << "': expected " << to_string(ep.direction)
                     << ", got " << to_string(found->direction) << "\n";
            if (found->width != ep.width)
                diff << "port '" << ep.name << "': expected width " << ep.width << ", got "
                     << found->width << "\n";
        }
    }
    for (const Port& ap : actual.ports) {
        bool known = false;
        for (const Port& ep : expected.ports)
            if (ep.name == ap.name) { known = true; break; }
        if (!known) diff << "unexpected port '" << ap.name << "'\n";
    }
    return diff.str();
}

} // namespace vgen
