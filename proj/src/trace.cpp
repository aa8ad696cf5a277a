#include "kdsynth/trace.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace kdsynth {

namespace {

constexpr std::pair<EventKind, std::string_view> kKindNames[] = {
    {EventKind::Query, "QUERY"}, {EventKind::Reply, "REPLY"}, {EventKind::Precond, "PRECOND"},
    {EventKind::Exec, "EXEC"},   {EventKind::Prune, "PRUNE"}, {EventKind::Hpo, "HPO"},
};

bool valid_token(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s)
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') return false;
    return true;
}

// pipe=... in pipeline mode, ctx=... in feature mode
std::string context_of(const Fields& fields) {
    for (const auto& [k, v] : fields)
        if (k == "pipe" || k == "ctx") return k + "=" + v;
    return {};
}

} // namespace

std::string_view to_string(EventKind kind) {
    for (const auto& [k, name] : kKindNames)
        if (k == kind) return name;
    return "?";
}

std::optional<EventKind> parse_event_kind(std::string_view text) {
    for (const auto& [k, name] : kKindNames)
        if (name == text) return k;
    return std::nullopt;
}

const std::string* TraceEvent::get(std::string_view key) const {
    for (const auto& [k, v] : fields)
        if (k == key) return &v;
    return nullptr;
}

std::string TraceEvent::value(std::string_view key) const {
    const auto* v = get(key);
    return v ? *v : std::string{};
}

std::string format_event(const TraceEvent& event) {
    std::string line = std::to_string(event.seq);
    line += ' ';
    line += to_string(event.kind);
    for (const auto& [k, v] : event.fields) {
        line += ' ';
        line += k;
        line += '=';
        line += v;
    }
    return line;
}

TraceEvent parse_event(std::string_view line) {
    std::istringstream in{std::string(line)};
    std::string seq, kind, token;
    if (!(in >> seq >> kind)) throw ParseError("trace: truncated line '" + std::string(line) + "'");
    TraceEvent ev;
    try {
        std::size_t used = 0;
        ev.seq = std::stoull(seq, &used);
        if (used != seq.size()) throw std::invalid_argument(seq);
    } catch (const std::exception&) {
        throw ParseError("trace: bad sequence number '" + seq + "'");
    }
    auto k = parse_event_kind(kind);
    if (!k) throw ParseError("trace: unknown event kind '" + kind + "'");
    ev.kind = *k;
    while (in >> token) {
        auto eq = token.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ParseError("trace: expected key=value, got '" + token + "'");
        ev.fields.emplace_back(token.substr(0, eq), token.substr(eq + 1));
    }
    return ev;
}

std::vector<TraceEvent> parse_trace(std::istream& in) {
    std::vector<TraceEvent> out;
    std::string line;
    std::uint64_t last = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto ev = parse_event(line);
        if (!out.empty() && ev.seq <= last) throw ParseError("trace: sequence numbers not increasing");
        last = ev.seq;
        out.push_back(std::move(ev));
    }
    return out;
}

std::vector<TraceEvent> read_trace(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open trace '" + path.string() + "'");
    return parse_trace(in);
}

std::uint64_t TraceSink::emit(EventKind kind, Fields fields) {
    std::lock_guard lock(mutex_);
    if (!open_) throw IoError("trace sink is closed");
    for (const auto& [k, v] : fields)
        if (!valid_token(k) || !valid_token(v) || k.find('=') != std::string::npos)
            throw TraceOrderError("trace: invalid field '" + k + "=" + v + "'");

    auto ctx = context_of(fields);
    if (kind == EventKind::Query) {
        if (open_query_) throw TraceOrderError("trace: QUERY while " + *open_query_ + " is unanswered");
        open_query_ = ctx;
    } else if (kind == EventKind::Reply) {
        if (!open_query_ || *open_query_ != ctx)
            throw TraceOrderError("trace: REPLY without matching QUERY (" + ctx + ")");
        open_query_.reset();
    } else if (kind == EventKind::Precond) {
        if (!open_query_) throw TraceOrderError("trace: PRECOND outside a query");
    }

    TraceEvent ev{events_.size() + 1, kind, std::move(fields)};
    if (stream_) {
        *stream_ << format_event(ev) << '\n';
        if (kind == EventKind::Prune) stream_->flush();
        if (!*stream_) throw IoError("trace: write failed");
    }
    events_.push_back(std::move(ev));
    return events_.back().seq;
}

void TraceSink::close() {
    std::lock_guard lock(mutex_);
    if (stream_ && open_) stream_->flush();
    open_ = false;
}

std::vector<TraceEvent> TraceSink::events() const {
    std::lock_guard lock(mutex_);
    return events_;
}

std::size_t TraceSink::size() const {
    std::lock_guard lock(mutex_);
    return events_.size();
}

std::vector<TraceEvent> TraceSink::since(std::size_t mark) const {
    std::lock_guard lock(mutex_);
    if (mark >= events_.size()) return {};
    return {events_.begin() + static_cast<long>(mark), events_.end()};
}

void TraceSink::rewind(std::size_t mark) {
    std::lock_guard lock(mutex_);
    if (stream_) throw Error("trace: cannot rewind a streaming sink");
    if (mark < events_.size()) events_.resize(mark);
    open_query_.reset();
}

std::string TraceSink::text() const {
    std::lock_guard lock(mutex_);
    std::string out;
    for (const auto& ev : events_) {
        out += format_event(ev);
        out += '\n';
    }
    return out;
}

void TraceSink::write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write trace '" + path.string() + "'");
    out << text();
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string format_exact(double value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

std::string join(const std::vector<std::string>& parts, char sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::vector<std::string> split_list(std::string_view text, char sep) {
    std::vector<std::string> out;
    if (text.empty() || text == "-") return out;
    std::size_t start = 0;
    while (true) {
        auto pos = text.find(sep, start);
        out.emplace_back(text.substr(start, pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

} // namespace kdsynth
