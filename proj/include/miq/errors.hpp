#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace miq {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error("io error: " + what) {}
};

// Malformed input file; carries the location that failed validation.
class SchemaError : public Error {
public:
    SchemaError(std::size_t line, std::string field, const std::string& reason)
        : Error("schema error at line " + std::to_string(line) + ", field '" + field +
                "': " + reason),
          line(line),
          field(std::move(field)) {}
    std::size_t line;
    std::string field;
};

class DuplicateId : public Error {
public:
    explicit DuplicateId(std::string id)
        : Error("duplicate transcript id '" + id + "'"), id(std::move(id)) {}
    std::string id;
};

class EmptyCorpus : public Error {
public:
    EmptyCorpus() : Error("corpus is empty") {}
};

class InsufficientData : public Error {
public:
    InsufficientData(std::string what_class, std::size_t needed, std::size_t have)
        : Error("insufficient data for '" + what_class + "': need " + std::to_string(needed) +
                ", have " + std::to_string(have)),
          subject(std::move(what_class)),
          needed(needed),
          have(have) {}
    std::string subject;
    std::size_t needed;
    std::size_t have;
};

class NegativeRate : public Error {
public:
    explicit NegativeRate(double value)
        : Error("category rate must be >= 0, got " + std::to_string(value)) {}
};

class MissingCategory : public Error {
public:
    explicit MissingCategory(std::string name)
        : Error("category '" + name + "' missing from rate map"), name(std::move(name)) {}
    std::string name;
};

class NoTherapistUtterances : public Error {
public:
    explicit NoTherapistUtterances(const std::string& id)
        : Error("transcript '" + id + "' has no therapist utterances") {}
};

class RaggedRows : public Error {
public:
    RaggedRows(std::size_t line, std::size_t expected, std::size_t got)
        : Error("ragged row at line " + std::to_string(line) + ": expected " +
                std::to_string(expected) + " columns, got " + std::to_string(got)) {}
};

class NonNumeric : public Error {
public:
    NonNumeric(std::size_t line, const std::string& token)
        : Error("non-numeric value '" + token + "' at line " + std::to_string(line)) {}
};

class EmptyMatrix : public Error {
public:
    EmptyMatrix() : Error("feature matrix is empty") {}
};

class SingleClass : public Error {
public:
    SingleClass() : Error("labeled data contains a single class") {}
};

class NonFinite : public Error {
public:
    explicit NonFinite(const std::string& where) : Error("non-finite value in " + where) {}
};

class FeatureMismatch : public Error {
public:
    explicit FeatureMismatch(const std::string& detail)
        : Error("feature mismatch: " + detail) {}
};

class ZeroVariance : public Error {
public:
    ZeroVariance() : Error("differences have zero variance") {}
};

class DegenerateMargin : public Error {
public:
    DegenerateMargin(std::size_t high, std::size_t n)
        : Error("degenerate margin: " + std::to_string(high) + " of " + std::to_string(n) +
                " high outcomes") {}
};

class UnpairedTranscript : public Error {
public:
    explicit UnpairedTranscript(std::string id)
        : Error("transcript '" + id + "' has no pair in the other group"), id(std::move(id)) {}
    std::string id;
};

class UnmappedCategory : public Error {
public:
    explicit UnmappedCategory(std::string name)
        : Error("no directive mapping for category '" + name + "'"), name(std::move(name)) {}
    std::string name;
};

class EmptyBase : public Error {
public:
    EmptyBase() : Error("base prompt is empty") {}
};

class MissingReplay : public Error {
public:
    explicit MissingReplay(std::string hash)
        : Error("no recorded response for request hash " + hash), hash(std::move(hash)) {}
    std::string hash;
};

class TransportError : public Error {
public:
    TransportError(int status, const std::string& body)
        : Error("transport failure (status " + std::to_string(status) + "): " + body),
          status(status) {}
    int status;
};

class RateLimited : public Error {
public:
    RateLimited() : Error("rate limited after retries") {}
};

}  // namespace miq
