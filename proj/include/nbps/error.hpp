#ifndef NBPS_ERROR_HPP
#define NBPS_ERROR_HPP

#include <stdexcept>
#include <string>

namespace nbps {

/// Malformed cell or token in an input file (bad integer, negative count, ...).
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// Structurally invalid input (duplicate ids, empty data section, dimension mismatch).
class SchemaError : public std::runtime_error {
public:
    explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

/// A sampler produced a non-finite intermediate; carries the sweep index and
/// the name of the variable block that failed.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& variable, long sweep)
        : std::runtime_error("non-finite value while updating '" + variable +
                             "' at sweep " + std::to_string(sweep)),
          variable_(variable), sweep_(sweep) {}

    const std::string& variable() const { return variable_; }
    long sweep() const { return sweep_; }

private:
    std::string variable_;
    long sweep_;
};

}

#endif
