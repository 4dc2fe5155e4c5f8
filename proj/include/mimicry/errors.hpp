#ifndef MIMICRY_ERRORS_HPP
#define MIMICRY_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace mimicry {

struct SyntaxError : std::runtime_error {
    int line;
    int column;
    SyntaxError(int line_, int column_, const std::string& what_)
        : std::runtime_error("syntax error at " + std::to_string(line_) + ":" +
                             std::to_string(column_) + ": " + what_),
          line(line_), column(column_) {}
};

struct StructureError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnknownMnemonic : std::runtime_error {
    explicit UnknownMnemonic(const std::string& mn)
        : std::runtime_error("unknown mnemonic: " + mn) {}
};

struct BadOperandCount : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UndefinedLabel : std::runtime_error {
    explicit UndefinedLabel(const std::string& l)
        : std::runtime_error("undefined label: " + l) {}
};

struct NoAlignment : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SchemaMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ScopeMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ReservedRegisterClash : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ReservedCellExhausted : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SpecInfeasible : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmptyClass : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace mimicry

#endif
