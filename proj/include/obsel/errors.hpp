#ifndef OBSEL_ERRORS_HPP
#define OBSEL_ERRORS_HPP

#include <cstddef>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>

namespace obsel {

// Byte offsets into the source text, end exclusive. start <= end.
struct SourceSpan {
    std::size_t start = 0;
    std::size_t end = 0;

    bool operator==(const SourceSpan&) const = default;
};

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input text. Carries the offending span and the token set the
// parser would have accepted at that point.
class ParseError : public Error {
public:
    ParseError(std::string msg, SourceSpan span, std::set<std::string> expected = {})
        : Error(std::move(msg)), span_(span), expected_(std::move(expected)) {}

    SourceSpan span() const { return span_; }
    const std::set<std::string>& expected() const { return expected_; }

private:
    SourceSpan span_;
    std::set<std::string> expected_;
};

// A substitution would move a free identifier under a binder of the same name.
class CaptureError : public Error {
public:
    CaptureError(std::string binder, std::string identifier)
        : Error("substitution captures '" + identifier + "' under binder '" + binder + "'"),
          binder_(std::move(binder)), identifier_(std::move(identifier)) {}

    const std::string& binder() const { return binder_; }
    const std::string& identifier() const { return identifier_; }

private:
    std::string binder_;
    std::string identifier_;
};

// Raised by skeleton extraction when a formula is a bare identifier or
// literal: there is no structural information to shingle.
class EmptySkeletonError : public Error {
public:
    EmptySkeletonError() : Error("formula has no operator skeleton") {}
};

class UndefinedSimilarityError : public Error {
public:
    UndefinedSimilarityError() : Error("Jaccard similarity is undefined for two empty sets") {}
};

class IncompleteBindingError : public Error {
public:
    explicit IncompleteBindingError(std::set<std::string> missing)
        : Error(make_message(missing)), missing_(std::move(missing)) {}

    const std::set<std::string>& missing() const { return missing_; }

private:
    static std::string make_message(const std::set<std::string>& missing) {
        std::string msg = "binding does not cover parameter(s):";
        for (const auto& name : missing) msg += " " + name;
        return msg;
    }

    std::set<std::string> missing_;
};

class DuplicateNameError : public Error {
public:
    DuplicateNameError(std::string name, std::string where)
        : Error("duplicate name '" + name + "' in " + where), name_(std::move(name)) {}

    const std::string& name() const { return name_; }

private:
    std::string name_;
};

class UndeclaredIdentifierError : public Error {
public:
    UndeclaredIdentifierError(std::string name, std::string where)
        : Error("undeclared identifier '" + name + "' in " + where), name_(std::move(name)) {}

    const std::string& name() const { return name_; }

private:
    std::string name_;
};

class IndexOutOfRangeError : public Error {
public:
    IndexOutOfRangeError(std::size_t index, std::size_t size)
        : Error("candidate index " + std::to_string(index) + " out of range (size " +
                std::to_string(size) + ")") {}
};

class UnmappedOperatorError : public Error {
public:
    explicit UnmappedOperatorError(std::string kind)
        : Error("no translation entry for operator kind " + kind), kind_(std::move(kind)) {}

    const std::string& kind() const { return kind_; }

private:
    std::string kind_;
};

class ToolError : public Error {
public:
    explicit ToolError(const std::string& msg) : Error(msg) {}
};

class MalformedRecordError : public Error {
public:
    MalformedRecordError(std::size_t line, const std::string& what)
        : Error("ledger line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class IoError : public Error {
public:
    IoError(const std::string& path, const std::string& what)
        : Error(path + ": " + what) {}
};

}  // namespace obsel

#endif  // OBSEL_ERRORS_HPP
