#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace kdsynth {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Knowledge base loading
class ParseError : public Error {
public:
    using Error::Error;
};

// Carries every violation found, not only the first.
class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<std::string> issues);
    const std::vector<std::string>& issues() const noexcept { return issues_; }

private:
    std::vector<std::string> issues_;
};

class UnknownNode : public Error {
public:
    explicit UnknownNode(const std::string& id) : Error("unknown node '" + id + "'") {}
};

class KindMismatch : public Error {
public:
    using Error::Error;
};

class EmptySlot : public Error {
public:
    using Error::Error;
};

// Registry / solver
class UnknownPredicate : public Error {
public:
    using Error::Error;
};

class UnknownOperation : public Error {
public:
    using Error::Error;
};

class MissingContext : public Error {
public:
    using Error::Error;
};

// Control flow
class InvalidTransition : public Error {
public:
    using Error::Error;
};

class RejectedInput : public Error {
public:
    RejectedInput(std::size_t index, const std::string& symbol, const std::string& why)
        : Error("input rejected at index " + std::to_string(index) + " (" + symbol + "): " + why),
          index_(index), symbol_(symbol) {}
    std::size_t index() const noexcept { return index_; }
    const std::string& symbol() const noexcept { return symbol_; }

private:
    std::size_t index_;
    std::string symbol_;
};

// Feature synthesis
class SlotMismatch : public Error {
public:
    using Error::Error;
};

class UnknownComponent : public Error {
public:
    using Error::Error;
};

class MissingColumn : public Error {
public:
    using Error::Error;
};

class MissingLink : public Error {
public:
    using Error::Error;
};

class NonNumeric : public Error {
public:
    using Error::Error;
};

// Numerics
class SingleClass : public Error {
public:
    using Error::Error;
};

class DegenerateData : public Error {
public:
    using Error::Error;
};

class EmptyData : public Error {
public:
    using Error::Error;
};

class EigenFailure : public Error {
public:
    using Error::Error;
};

class TooFewFeatures : public Error {
public:
    using Error::Error;
};

class NoSplit : public Error {
public:
    using Error::Error;
};

class SizeTooLarge : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace kdsynth
