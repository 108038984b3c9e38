#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace rdc {

struct EpochRecord {
    long long epoch = 0;
    double l1 = 0.0;
    double l2 = 0.0;
    double loss = 0.0;
    double tau = 0.0;
    std::size_t n_core = 0;
    std::optional<double> id;
    std::optional<double> lid;
    std::optional<double> acc;
};

enum class StopReason { Stability, MaxEpochs };

inline const char* to_string(StopReason r) { return r == StopReason::Stability ? "stability" : "max-epochs"; }

struct RunTrace {
    std::vector<EpochRecord> epochs;
    std::optional<StopReason> stop_reason;
};

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string format_optional(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

/// Columns: epoch,l1,l2,loss,tau,n_core,id,lid,acc. Missing values are empty.
inline std::string trace_csv(const RunTrace& t) {
    std::ostringstream os;
    os << "epoch,l1,l2,loss,tau,n_core,id,lid,acc\n";
    for (const auto& r : t.epochs) {
        os << r.epoch << ',' << format_double(r.l1) << ',' << format_double(r.l2) << ',' << format_double(r.loss)
           << ',' << format_double(r.tau) << ',' << r.n_core << ',' << format_optional(r.id) << ','
           << format_optional(r.lid) << ',' << format_optional(r.acc) << '\n';
    }
    return os.str();
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << text;
}

inline std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

/// Trace CSV plus <path>.meta.json holding the stop reason.
inline void write_trace(const RunTrace& t, const std::filesystem::path& csv_path) {
    write_text(csv_path, trace_csv(t));
    nlohmann::ordered_json meta;
    meta["epochs"] = t.epochs.size();
    if (t.stop_reason) meta["stop_reason"] = to_string(*t.stop_reason);
    if (!t.epochs.empty()) meta["final_tau"] = t.epochs.back().tau;
    write_text(csv_path.string() + ".meta.json", meta.dump(2) + "\n");
}

}  // namespace rdc
