#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ebsp {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (element not in a universe,
/// malformed vocabulary, invalid node address, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Text input could not be parsed. `line` and `column` are 1-based; zero
/// means "not applicable".
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0, std::size_t column = 0)
        : Error(format(what, line, column)), line_(line), column_(column) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    static std::string format(const std::string& what, std::size_t line, std::size_t column) {
        if (line == 0) return what;
        std::string s = "line " + std::to_string(line);
        if (column != 0) s += ", column " + std::to_string(column);
        return s + ": " + what;
    }

    std::size_t line_;
    std::size_t column_;
};

/// A configured computation budget (oracle cap, enumeration cap) would be
/// exceeded.
class BudgetError : public Error {
public:
    using Error::Error;
};

/// Two distinct canonical type serializations hashed to the same digest.
class CollisionError : public Error {
public:
    using Error::Error;
};

/// Input tree is not accepted by the tree automaton.
class RejectedTreeError : public Error {
public:
    using Error::Error;
};

/// Reduction requested on a tree shape it does not support (unranked
/// operations with base rank above two).
class UnsupportedShapeError : public Error {
public:
    using Error::Error;
};

/// A scale request cannot be met; carries the sizes that can be reached.
class InfeasibleError : public Error {
public:
    InfeasibleError(const std::string& what, std::vector<std::size_t> achievable)
        : Error(what), achievable_(std::move(achievable)) {}

    const std::vector<std::size_t>& achievable() const noexcept { return achievable_; }

private:
    std::vector<std::size_t> achievable_;
};

}  // namespace ebsp
