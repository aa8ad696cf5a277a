#pragma once
// Line-oriented explainability trace: `<seq> <KIND> key=value ...`

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kdsynth/errors.hpp"

namespace kdsynth {

enum class EventKind { Query, Reply, Precond, Exec, Prune, Hpo };

std::string_view to_string(EventKind kind);
std::optional<EventKind> parse_event_kind(std::string_view text);

using Fields = std::vector<std::pair<std::string, std::string>>;

struct TraceEvent {
    std::uint64_t seq = 0;
    EventKind kind = EventKind::Query;
    Fields fields;

    const std::string* get(std::string_view key) const;
    std::string value(std::string_view key) const; // empty when absent
    bool operator==(const TraceEvent&) const = default;
};

class TraceOrderError : public Error {
public:
    using Error::Error;
};

std::string format_event(const TraceEvent& event);
TraceEvent parse_event(std::string_view line);
std::vector<TraceEvent> parse_trace(std::istream& in);
std::vector<TraceEvent> read_trace(const std::filesystem::path& path);

// Single serialization point. Assigns seq numbers, enforces QUERY/REPLY
// pairing, keeps every event in memory and optionally streams lines out.
class TraceSink {
public:
    TraceSink() = default;
    explicit TraceSink(std::ostream* stream) : stream_(stream) {}

    std::uint64_t emit(EventKind kind, Fields fields);
    void close();
    bool is_open() const { return open_; }

    std::vector<TraceEvent> events() const;
    std::size_t size() const;
    std::vector<TraceEvent> since(std::size_t mark) const;
    // Drops events after `mark`; only for sinks without a stream.
    void rewind(std::size_t mark);

    std::string text() const;
    void write(const std::filesystem::path& path) const;

private:
    mutable std::mutex mutex_;
    std::ostream* stream_ = nullptr;
    std::vector<TraceEvent> events_;
    std::optional<std::string> open_query_;
    bool open_ = true;
};

// Formats a double with round-trip precision (%.17g).
std::string format_exact(double value);
std::string join(const std::vector<std::string>& parts, char sep = ',');
std::vector<std::string> split_list(std::string_view text, char sep = ',');

} // namespace kdsynth
