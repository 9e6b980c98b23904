// obsel/ledger.hpp — the append-only attempt ledger.
//
// One JSON object per line with fields ts, po_id, po_hash, prover, params,
// n_hyps, lemmas, verdict, ms.  Appends go through a single write() on an
// O_APPEND descriptor followed by fsync, so concurrent writers produce
// intact lines and a crash loses at most the unflushed record.

#ifndef OBSEL_LEDGER_HPP
#define OBSEL_LEDGER_HPP

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "obsel/errors.hpp"
#include "obsel/similarity.hpp"

namespace obsel {

enum class Verdict { Valid, Invalid, Unknown, Timeout, ToolError };

inline const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Valid: return "Valid";
        case Verdict::Invalid: return "Invalid";
        case Verdict::Unknown: return "Unknown";
        case Verdict::Timeout: return "Timeout";
        case Verdict::ToolError: return "ToolError";
    }
    return "?";
}

inline Verdict verdict_from(const std::string& s) {
    if (s == "Valid") return Verdict::Valid;
    if (s == "Invalid") return Verdict::Invalid;
    if (s == "Unknown") return Verdict::Unknown;
    if (s == "Timeout") return Verdict::Timeout;
    if (s == "ToolError") return Verdict::ToolError;
    throw Error("unknown verdict '" + s + "'");
}

struct AttemptRecord {
    std::string ts;  // RFC 3339 UTC
    std::string po_id;
    std::uint64_t po_hash = 0;
    std::string prover;
    ScoreParams params;
    std::size_t n_hyps = 0;
    std::vector<std::string> lemmas;
    Verdict verdict = Verdict::Unknown;
    std::int64_t ms = 0;
};

inline std::string now_rfc3339() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace detail {

inline std::uint64_t hash_from_hex(const std::string& s) {
    if (s.size() != 16) throw Error("po_hash must be 16 hex digits");
    std::uint64_t out = 0;
    for (char c : s) {
        out <<= 4;
        if (c >= '0' && c <= '9') out |= static_cast<std::uint64_t>(c - '0');
        else if (c >= 'a' && c <= 'f') out |= static_cast<std::uint64_t>(c - 'a' + 10);
        else throw Error("po_hash must be lowercase hex");
    }
    return out;
}

}  // namespace detail

inline nlohmann::ordered_json params_to_json(const ScoreParams& p) {
    return {{"c", p.structure_coeff},     {"n", p.shingle_size},
            {"tau", p.prune_threshold},   {"cap", p.profile_cap},
            {"theta", p.score_threshold}, {"top", p.max_candidates},
            {"depth", p.ident_depth}};
}

inline ScoreParams params_from_json(const nlohmann::json& j) {
    ScoreParams p;
    p.structure_coeff = j.at("c").get<double>();
    p.shingle_size = j.at("n").get<std::size_t>();
    p.prune_threshold = j.at("tau").get<long long>();
    p.profile_cap = j.at("cap").get<std::size_t>();
    p.score_threshold = j.at("theta").get<double>();
    p.max_candidates = j.at("top").get<std::size_t>();
    p.ident_depth = j.at("depth").get<std::size_t>();
    return p;
}

inline std::string record_to_line(const AttemptRecord& rec) {
    nlohmann::ordered_json j;
    j["ts"] = rec.ts;
    j["po_id"] = rec.po_id;
    j["po_hash"] = hash_hex(rec.po_hash);
    j["prover"] = rec.prover;
    j["params"] = params_to_json(rec.params);
    j["n_hyps"] = rec.n_hyps;
    j["lemmas"] = rec.lemmas;
    j["verdict"] = verdict_name(rec.verdict);
    j["ms"] = rec.ms;
    return j.dump();
}

inline AttemptRecord record_from_line(const std::string& line) {
    nlohmann::json j = nlohmann::json::parse(line);
    AttemptRecord rec;
    rec.ts = j.at("ts").get<std::string>();
    rec.po_id = j.at("po_id").get<std::string>();
    rec.po_hash = detail::hash_from_hex(j.at("po_hash").get<std::string>());
    rec.prover = j.at("prover").get<std::string>();
    rec.params = params_from_json(j.at("params"));
    rec.n_hyps = j.at("n_hyps").get<std::size_t>();
    rec.lemmas = j.at("lemmas").get<std::vector<std::string>>();
    rec.verdict = verdict_from(j.at("verdict").get<std::string>());
    rec.ms = j.at("ms").get<std::int64_t>();
    if (rec.ms < 0) throw Error("negative duration");
    return rec;
}

// Appends one line, durably flushed before returning.
inline void record_attempt(const std::string& path, const AttemptRecord& rec) {
    std::string line = record_to_line(rec);
    line += '\n';
    int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd < 0) throw IoError(path, std::strerror(errno));
    std::size_t off = 0;
    while (off < line.size()) {
        ssize_t n = ::write(fd, line.data() + off, line.size() - off);
        if (n < 0) {
            int e = errno;
            ::close(fd);
            throw IoError(path, std::strerror(e));
        }
        off += static_cast<std::size_t>(n);
    }
    if (::fsync(fd) != 0) {
        int e = errno;
        ::close(fd);
        throw IoError(path, std::strerror(e));
    }
    ::close(fd);
}

// ── Statistics ──────────────────────────────────────────────────────────────

struct LedgerAggregate {
    std::size_t attempts = 0;
    std::size_t valid = 0;

    double success_rate() const {
        return attempts == 0 ? 0.0 : static_cast<double>(valid) / static_cast<double>(attempts);
    }
};

struct LedgerStats {
    std::size_t total = 0;
    std::map<std::string, LedgerAggregate> per_prover;
    std::map<std::string, LedgerAggregate> per_lemma;
};

// Counts and success rates grouped by prover id and by injected lemma name.
inline LedgerStats ledger_stats(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path, "cannot open");
    LedgerStats stats;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        AttemptRecord rec;
        try {
            rec = record_from_line(line);
        } catch (const std::exception& e) {
            throw MalformedRecordError(lineno, e.what());
        }
        ++stats.total;
        auto& prover = stats.per_prover[rec.prover];
        ++prover.attempts;
        prover.valid += rec.verdict == Verdict::Valid;
        for (const auto& lemma : rec.lemmas) {
            auto& agg = stats.per_lemma[lemma];
            ++agg.attempts;
            agg.valid += rec.verdict == Verdict::Valid;
        }
    }
    return stats;
}

}  // namespace obsel

#endif  // OBSEL_LEDGER_HPP
