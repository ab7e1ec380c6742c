#pragma once

#include <stdexcept>
#include <string>

namespace vgen {

// Base for all typed errors thrown by the library. `code()` is a stable
// machine-readable identifier; what() carries the human-readable detail.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& msg)
        : std::runtime_error(code + ": " + msg), code_(std::move(code)) {}

    const std::string& code() const { return code_; }

private:
    std::string code_;
};

#define VGEN_DEFINE_ERROR(Name)                                        \
    class Name : public Error {                                        \
    public:                                                            \
        explicit Name(const std::string& msg) : Error(#Name, msg) {}   \
    }

// domain
VGEN_DEFINE_ERROR(MalformedHeader);
VGEN_DEFINE_ERROR(UnsupportedConstruct);

// llm backend
VGEN_DEFINE_ERROR(ScriptExhausted);
VGEN_DEFINE_ERROR(RetriesExhausted);
VGEN_DEFINE_ERROR(ReplayMismatch);
VGEN_DEFINE_ERROR(AuthMissing);
VGEN_DEFINE_ERROR(ConfigError);

// agents
VGEN_DEFINE_ERROR(NoCodeBlock);
VGEN_DEFINE_ERROR(InterfaceViolation);
VGEN_DEFINE_ERROR(VerdictProtocolMissing);
VGEN_DEFINE_ERROR(MissingSection);
VGEN_DEFINE_ERROR(ScoreOutOfRange);
VGEN_DEFINE_ERROR(UnboundPlaceholder);

// sim
VGEN_DEFINE_ERROR(SimulatorNotFound);
VGEN_DEFINE_ERROR(WorkdirIO);

// eval
VGEN_DEFINE_ERROR(DomainError);
VGEN_DEFINE_ERROR(ParseError);
VGEN_DEFINE_ERROR(MappingError);

// cli / replay
VGEN_DEFINE_ERROR(VerifyMismatch);

#undef VGEN_DEFINE_ERROR

} // namespace vgen
