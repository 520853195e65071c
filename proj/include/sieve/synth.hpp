#ifndef SIEVE_SYNTH_HPP
#define SIEVE_SYNTH_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "sieve/errors.hpp"
#include "sieve/rng.hpp"

namespace sieve {

// ---------------------------------------------------------------------------
// Synthetic traffic fixtures. Real capture datasets cannot ship with this
// repository, so these generators emit files in the same two CSV layouts
// with the per-class row counts of the real corpora. Feature values are drawn from
// class-conditioned profiles, which keeps the classes learnable without
// copying any real flow.
// ---------------------------------------------------------------------------

// class order: Normal, then the four attack families
struct SynthCounts {
    std::array<std::size_t, 5> train;
    std::array<std::size_t, 5> test;
};

inline SynthCounts nslkdd_counts() {
    return {{67343, 45927, 11656, 995, 52}, {9711, 7458, 2421, 2887, 67}};
}

inline SynthCounts cidds_counts() {
    return {{53000, 36000, 9117, 500, 1055}, {15000, 6604, 3250, 765, 803}};
}

// scale = 1 keeps the real-corpus counts exactly; smaller scales floor at 4
// rows per class so every class stays usable for pairing and references.
inline std::array<std::size_t, 5> scale_counts(const std::array<std::size_t, 5>& full,
                                               double scale) {
    if (!(scale > 0.0 && scale <= 1.0)) throw UsageError("fixture scale must be in (0,1]");
    std::array<std::size_t, 5> out{};
    for (std::size_t c = 0; c < 5; ++c) {
        double scaled = static_cast<double>(full[c]) * scale;
        out[c] = std::max<std::size_t>(4, static_cast<std::size_t>(std::llround(scaled)));
    }
    return out;
}

namespace synth_detail {

using WeightedToken = std::pair<const char*, double>;

inline const char* pick(Rng& rng, const std::vector<WeightedToken>& options) {
    double total = 0.0;
    for (const auto& opt : options) total += opt.second;
    double u = rng.uniform01() * total;
    for (const auto& opt : options) {
        u -= opt.second;
        if (u <= 0.0) return opt.first;
    }
    return options.back().first;
}

// exponential with the given mean, rounded to a whole count
inline long long exp_count(Rng& rng, double mean) {
    if (mean <= 0.0) return 0;
    double u = rng.uniform01();
    return std::llround(-mean * std::log(1.0 - u));
}

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

// two-decimal rate centered on `center`, like the ratio columns in flow data
inline std::string rate2(Rng& rng, double center) {
    double v = clamp01(center + 0.12 * rng.normal());
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

inline int flag01(Rng& rng, double p) { return rng.uniform01() < p ? 1 : 0; }

inline std::string itos(long long v) { return std::to_string(v); }

// deterministic split of `total` rows across weighted sub-types: floor
// shares, remainder to the heaviest (first-listed) type
inline std::vector<std::size_t> apportion(std::size_t total,
                                          const std::vector<WeightedToken>& shares) {
    std::vector<std::size_t> out(shares.size(), 0);
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < shares.size(); ++i) {
        out[i] = static_cast<std::size_t>(static_cast<double>(total) * shares[i].second);
        assigned += out[i];
    }
    out[0] += total - assigned;
    return out;
}

}  // namespace synth_detail

// ---------------------------------------------------------------------------
// KDD-layout fixture: 41 features, raw label, difficulty score; no header.
// Categorical columns: protocol (1), service (2), flag (3).
// ---------------------------------------------------------------------------

// raw attack types per family, heaviest first; shares steer apportionment
inline const std::vector<std::vector<synth_detail::WeightedToken>>& kdd_attack_types() {
    static const std::vector<std::vector<synth_detail::WeightedToken>> types{
        {{"neptune", 0.80}, {"smurf", 0.10}, {"back", 0.04}, {"teardrop", 0.03},
         {"pod", 0.02}, {"land", 0.01}},
        {{"satan", 0.40}, {"ipsweep", 0.30}, {"portsweep", 0.20}, {"nmap", 0.10}},
        {{"warezclient", 0.70}, {"guess_passwd", 0.15}, {"warezmaster", 0.05}, {"imap", 0.03},
         {"ftp_write", 0.03}, {"multihop", 0.02}, {"phf", 0.01}, {"spy", 0.01}},
        {{"buffer_overflow", 0.60}, {"rootkit", 0.20}, {"loadmodule", 0.15}, {"perl", 0.05}},
    };
    return types;
}

inline const std::array<const char*, 4>& kdd_family_names() {
    static const std::array<const char*, 4> names{"DoS", "Probe", "R2L", "U2R"};
    return names;
}

// mapping-file lines: one "raw-type family" pair per line, family blocks in
// class order so class indices are stable
inline std::vector<std::string> kdd_family_map_lines() {
    std::vector<std::string> lines;
    const auto& types = kdd_attack_types();
    for (std::size_t f = 0; f < types.size(); ++f)
        for (const auto& entry : types[f])
            lines.push_back(std::string(entry.first) + " " + kdd_family_names()[f]);
    return lines;
}

namespace synth_detail {

struct KddRowPlan {
    std::size_t cls;          // 0 Normal .. 4 U2R
    const char* raw_label;
};

inline std::vector<WeightedToken> kdd_protocol(std::size_t cls) {
    switch (cls) {
        case 0: return {{"tcp", 0.80}, {"udp", 0.15}, {"icmp", 0.05}};
        case 1: return {{"tcp", 0.85}, {"icmp", 0.10}, {"udp", 0.05}};
        case 2: return {{"tcp", 0.50}, {"icmp", 0.30}, {"udp", 0.20}};
        case 3: return {{"tcp", 0.95}, {"udp", 0.05}};
        default: return {{"tcp", 1.0}};
    }
}

inline std::vector<WeightedToken> kdd_service(std::size_t cls) {
    switch (cls) {
        case 0:
            return {{"http", 0.45}, {"smtp", 0.12}, {"domain_u", 0.12}, {"ftp_data", 0.10},
                    {"telnet", 0.04}, {"ftp", 0.04}, {"pop_3", 0.03}, {"ssh", 0.02},
                    {"imap4", 0.02}, {"other", 0.06}};
        case 1: return {{"private", 0.50}, {"http", 0.30}, {"ecr_i", 0.15}, {"other", 0.05}};
        case 2:
            return {{"private", 0.40}, {"eco_i", 0.30}, {"http", 0.10}, {"domain_u", 0.10},
                    {"other", 0.10}};
        case 3:
            return {{"ftp", 0.35}, {"ftp_data", 0.25}, {"telnet", 0.15}, {"imap4", 0.10},
                    {"http", 0.10}, {"pop_3", 0.05}};
        default: return {{"telnet", 0.55}, {"ftp_data", 0.20}, {"http", 0.15}, {"ftp", 0.10}};
    }
}

inline std::vector<WeightedToken> kdd_flag(std::size_t cls) {
    switch (cls) {
        case 0: return {{"SF", 0.90}, {"REJ", 0.05}, {"RSTO", 0.03}, {"S0", 0.02}};
        case 1: return {{"S0", 0.70}, {"SF", 0.20}, {"REJ", 0.10}};
        case 2: return {{"SF", 0.40}, {"REJ", 0.30}, {"RSTR", 0.20}, {"S0", 0.10}};
        case 3: return {{"SF", 0.85}, {"RSTO", 0.10}, {"REJ", 0.05}};
        default: return {{"SF", 0.95}, {"RSTR", 0.05}};
    }
}

// per-class centers for the numeric columns; the five profiles differ on
// several axes each so both layers have signal to learn
struct KddNumericProfile {
    double duration, src_bytes, dst_bytes;
    double wrong_fragment, urgent, hot, failed_logins;
    double logged_in_p, compromised, root_shell_p, su_attempted, num_root;
    double file_creations, shells, access_files, guest_login_p, land_p;
    double count, srv_count;
    double serror, rerror, same_srv, diff_srv, srv_diff_host;
    double dh_count, dh_srv_count;
    double dh_same_srv, dh_diff_srv, dh_same_src_port, dh_srv_diff_host, dh_serror, dh_rerror;
};

inline KddNumericProfile kdd_profile(std::size_t cls) {
    switch (cls) {
        case 0:   // normal traffic: logged-in sessions, low error rates
            return {20, 2500, 4000, 0.0, 0.0, 0.05, 0.02,
                    0.70, 0.01, 0.001, 0.0, 0.01,
                    0.02, 0.001, 0.01, 0.03, 0.0,
                    8, 10,
                    0.03, 0.05, 0.85, 0.06, 0.10,
                    120, 150,
                    0.80, 0.05, 0.10, 0.03, 0.03, 0.05};
        case 1:   // flood: huge connection counts, syn errors, tiny payloads
            return {2, 600, 50, 0.15, 0.0, 0.01, 0.0,
                    0.05, 0.005, 0.0, 0.0, 0.0,
                    0.0, 0.0, 0.0, 0.0, 0.005,
                    420, 400,
                    0.92, 0.04, 0.95, 0.02, 0.02,
                    250, 240,
                    0.92, 0.02, 0.50, 0.02, 0.90, 0.04};
        case 2:   // scan: many hosts, high reject/diff-service rates
            return {4, 30, 10, 0.0, 0.0, 0.01, 0.0,
                    0.02, 0.0, 0.0, 0.0, 0.0,
                    0.0, 0.0, 0.0, 0.0, 0.0,
                    150, 12,
                    0.15, 0.55, 0.25, 0.70, 0.50,
                    240, 25,
                    0.10, 0.60, 0.60, 0.25, 0.15, 0.55};
        case 3:   // remote-to-local: long logins, failed passwords, guest use
            return {900, 1200, 3500, 0.0, 0.05, 2.5, 1.8,
                    0.55, 0.30, 0.01, 0.02, 0.05,
                    0.10, 0.01, 0.05, 0.50, 0.0,
                    3, 3,
                    0.02, 0.10, 0.90, 0.04, 0.10,
                    15, 8,
                    0.70, 0.08, 0.30, 0.05, 0.02, 0.10};
        default:  // user-to-root: shell escalation markers on few connections
            return {180, 1500, 800, 0.0, 0.10, 6.0, 0.30,
                    0.95, 1.8, 0.70, 0.40, 4.5,
                    2.5, 0.80, 0.60, 0.05, 0.0,
                    2, 2,
                    0.02, 0.03, 0.95, 0.02, 0.05,
                    6, 4,
                    0.90, 0.03, 0.20, 0.05, 0.02, 0.03};
    }
}

inline void append_kdd_row(std::string& out, Rng& rng, const KddRowPlan& plan) {
    const KddNumericProfile p = kdd_profile(plan.cls);
    auto add = [&out](const std::string& cell) {
        if (!out.empty() && out.back() != '\n') out += ',';
        out += cell;
    };
    add(itos(exp_count(rng, p.duration)));                    // duration
    add(pick(rng, kdd_protocol(plan.cls)));                   // protocol
    add(pick(rng, kdd_service(plan.cls)));                    // service
    add(pick(rng, kdd_flag(plan.cls)));                       // flag
    add(itos(exp_count(rng, p.src_bytes)));                   // src_bytes
    add(itos(exp_count(rng, p.dst_bytes)));                   // dst_bytes
    add(itos(flag01(rng, p.land_p)));                         // land
    add(itos(exp_count(rng, p.wrong_fragment)));              // wrong_fragment
    add(itos(exp_count(rng, p.urgent)));                      // urgent
    add(itos(exp_count(rng, p.hot)));                         // hot
    add(itos(exp_count(rng, p.failed_logins)));               // num_failed_logins
    add(itos(flag01(rng, p.logged_in_p)));                    // logged_in
    add(itos(exp_count(rng, p.compromised)));                 // num_compromised
    add(itos(flag01(rng, p.root_shell_p)));                   // root_shell
    add(itos(exp_count(rng, p.su_attempted)));                // su_attempted
    add(itos(exp_count(rng, p.num_root)));                    // num_root
    add(itos(exp_count(rng, p.file_creations)));              // num_file_creations
    add(itos(exp_count(rng, p.shells)));                      // num_shells
    add(itos(exp_count(rng, p.access_files)));                // num_access_files
    add("0");                                                 // num_outbound_cmds, constant
    add(itos(flag01(rng, 0.001)));                            // is_host_login
    add(itos(flag01(rng, p.guest_login_p)));                  // is_guest_login
    add(itos(1 + exp_count(rng, p.count)));                   // count
    add(itos(1 + exp_count(rng, p.srv_count)));               // srv_count
    add(rate2(rng, p.serror));                                // serror_rate
    add(rate2(rng, p.serror));                                // srv_serror_rate
    add(rate2(rng, p.rerror));                                // rerror_rate
    add(rate2(rng, p.rerror));                                // srv_rerror_rate
    add(rate2(rng, p.same_srv));                              // same_srv_rate
    add(rate2(rng, p.diff_srv));                              // diff_srv_rate
    add(rate2(rng, p.srv_diff_host));                         // srv_diff_host_rate
    add(itos(1 + exp_count(rng, p.dh_count)));                // dst_host_count
    add(itos(1 + exp_count(rng, p.dh_srv_count)));            // dst_host_srv_count
    add(rate2(rng, p.dh_same_srv));                           // dst_host_same_srv_rate
    add(rate2(rng, p.dh_diff_srv));                           // dst_host_diff_srv_rate
    add(rate2(rng, p.dh_same_src_port));                      // dst_host_same_src_port_rate
    add(rate2(rng, p.dh_srv_diff_host));                      // dst_host_srv_diff_host_rate
    add(rate2(rng, p.dh_serror));                             // dst_host_serror_rate
    add(rate2(rng, p.dh_serror));                             // dst_host_srv_serror_rate
    add(rate2(rng, p.dh_rerror));                             // dst_host_rerror_rate
    add(rate2(rng, p.dh_rerror));                             // dst_host_srv_rerror_rate
    add(plan.raw_label);                                      // label
    add(itos(rng.range(0, 21)));                              // difficulty score
    out += '\n';
}

inline std::vector<KddRowPlan> kdd_row_plans(const std::array<std::size_t, 5>& counts,
                                             Rng& rng) {
    std::vector<KddRowPlan> plans;
    for (std::size_t i = 0; i < counts[0]; ++i) plans.push_back({0, "normal"});
    const auto& types = kdd_attack_types();
    for (std::size_t f = 0; f < 4; ++f) {
        auto split = apportion(counts[f + 1], types[f]);
        for (std::size_t t = 0; t < split.size(); ++t)
            for (std::size_t i = 0; i < split[t]; ++i)
                plans.push_back({f + 1, types[f][t].first});
    }
    rng.shuffle(plans);
    return plans;
}

}  // namespace synth_detail

inline void write_nslkdd_csv(const std::string& path, const std::array<std::size_t, 5>& counts,
                             std::uint64_t seed) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write fixture: " + path);
    Rng rng(seed);
    auto plans = synth_detail::kdd_row_plans(counts, rng);
    std::string buf;
    for (const auto& plan : plans) {
        buf.clear();
        synth_detail::append_kdd_row(buf, rng, plan);
        out << buf;
    }
}

// ---------------------------------------------------------------------------
// Flow-layout fixture: header + 10 features + class label. Categorical
// columns: timestamp (0), protocol (2), src/dst address (3, 5), TCP flags
// (9); byte counts use the "1.2 M" suffix convention above a million.
// ---------------------------------------------------------------------------

inline const std::array<const char*, 4>& cidds_family_names() {
    static const std::array<const char*, 4> names{"DoS", "PortScan", "PingScan", "BruteForce"};
    return names;
}

inline const std::array<const char*, 4>& cidds_raw_labels() {
    static const std::array<const char*, 4> raw{"dos", "portScan", "pingScan", "bruteForce"};
    return raw;
}

inline std::vector<std::string> cidds_family_map_lines() {
    std::vector<std::string> lines;
    for (std::size_t f = 0; f < 4; ++f)
        lines.push_back(std::string(cidds_raw_labels()[f]) + " " + cidds_family_names()[f]);
    return lines;
}

namespace synth_detail {

struct CiddsProfile {
    int hour_lo, hour_hi;                       // activity window for timestamps
    std::vector<WeightedToken> proto, src_ip, dst_ip, flags;
    std::vector<WeightedToken> dst_port;        // tokens are literal port strings
    bool scan_ports;                            // portscan sweeps 1..1024 instead
    double duration, packets, bytes;
};

inline CiddsProfile cidds_profile(std::size_t cls) {
    static const std::vector<WeightedToken> office{
        {"192.168.100.5", 0.1}, {"192.168.100.6", 0.1}, {"192.168.100.7", 0.1},
        {"192.168.100.8", 0.1}, {"192.168.100.9", 0.1}, {"192.168.100.12", 0.1},
        {"192.168.100.15", 0.1}, {"192.168.100.21", 0.1}, {"192.168.100.24", 0.1},
        {"192.168.100.31", 0.1}};
    static const std::vector<WeightedToken> servers{
        {"192.168.220.15", 0.4}, {"192.168.220.16", 0.3}, {"192.168.210.5", 0.3}};
    switch (cls) {
        case 0:
            return {7, 23, {{"TCP", 0.80}, {"UDP", 0.18}, {"ICMP", 0.02}}, office, servers,
                    {{".AP.SF", 0.70}, {".APRSF", 0.20}, {".AP...", 0.10}},
                    {{"80", 0.40}, {"443", 0.30}, {"53", 0.15}, {"25", 0.08}, {"110", 0.07}},
                    false, 1.5, 12, 50000};
        case 1:
            return {13, 15, {{"TCP", 1.0}}, {{"10.0.4.7", 0.6}, {"10.0.4.8", 0.4}}, servers,
                    {{".A..S.", 0.60}, {"....S.", 0.30}, {".A.R..", 0.10}},
                    {{"80", 1.0}}, false, 0.05, 900, 60000};
        case 2:
            return {2, 4, {{"TCP", 0.90}, {"UDP", 0.10}}, {{"10.0.9.3", 1.0}}, servers,
                    {{"....S.", 0.80}, {".A.R..", 0.20}},
                    {}, true, 0.001, 1, 90};
        case 3:
            return {2, 3, {{"ICMP", 1.0}}, {{"10.0.9.3", 0.5}, {"10.0.9.4", 0.5}}, servers,
                    {{"......", 1.0}},
                    {{"0", 1.0}}, false, 0.001, 1, 64};
        default:
            return {22, 23, {{"TCP", 1.0}}, {{"10.0.13.21", 1.0}},
                    {{"192.168.220.16", 1.0}},
                    {{".AP.SF", 0.90}, {".APRS.", 0.10}},
                    {{"22", 1.0}}, false, 3.0, 14, 3000};
    }
}

inline std::string cidds_timestamp(Rng& rng, const CiddsProfile& p) {
    // five capture days, minute granularity, class-specific activity hours
    int day = 20 + rng.range(0, 4);
    int hour = p.hour_lo + rng.range(0, p.hour_hi - p.hour_lo);
    int minute = rng.range(0, 59);
    char buf[24];
    std::snprintf(buf, sizeof(buf), "2017-03-%02d %02d:%02d", day, hour, minute);
    return buf;
}

inline std::string cidds_bytes(long long v) {
    if (v >= 1000000) {
        char buf[24];
        std::snprintf(buf, sizeof(buf), "%.1f M", static_cast<double>(v) / 1e6);
        return buf;
    }
    return itos(v);
}

inline std::string cidds_duration(Rng& rng, double mean) {
    double u = rng.uniform01();
    double v = mean <= 0.0 ? 0.0 : -mean * std::log(1.0 - u);
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

inline void append_cidds_row(std::string& out, Rng& rng, std::size_t cls,
                             const char* raw_label) {
    const CiddsProfile p = cidds_profile(cls);
    auto add = [&out](const std::string& cell) {
        if (!out.empty() && out.back() != '\n') out += ',';
        out += cell;
    };
    add(cidds_timestamp(rng, p));                            // Date first seen
    add(cidds_duration(rng, p.duration));                    // Duration
    add(pick(rng, p.proto));                                 // Proto
    add(pick(rng, p.src_ip));                                // Src IP Addr
    add(itos(1024 + rng.range(0, 64511)));                   // Src Pt
    add(pick(rng, p.dst_ip));                                // Dst IP Addr
    add(p.scan_ports ? itos(1 + rng.range(0, 1023))
                     : std::string(pick(rng, p.dst_port)));  // Dst Pt
    add(itos(1 + exp_count(rng, p.packets)));                // Packets
    add(cidds_bytes(42 + exp_count(rng, p.bytes)));          // Bytes
    add(pick(rng, p.flags));                                 // Flags
    add(raw_label);                                          // class
    out += '\n';
}

}  // namespace synth_detail

inline void write_cidds_csv(const std::string& path, const std::array<std::size_t, 5>& counts,
                            std::uint64_t seed) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write fixture: " + path);
    out << "Date first seen,Duration,Proto,Src IP Addr,Src Pt,Dst IP Addr,Dst Pt,Packets,"
           "Bytes,Flags,class\n";
    Rng rng(seed);
    struct Plan {
        std::size_t cls;
        const char* raw_label;
    };
    std::vector<Plan> plans;
    for (std::size_t i = 0; i < counts[0]; ++i) plans.push_back({0, "normal"});
    for (std::size_t f = 0; f < 4; ++f)
        for (std::size_t i = 0; i < counts[f + 1]; ++i)
            plans.push_back({f + 1, cidds_raw_labels()[f]});
    rng.shuffle(plans);
    std::string buf;
    for (const auto& plan : plans) {
        buf.clear();
        synth_detail::append_cidds_row(buf, rng, plan.cls, plan.raw_label);
        out << buf;
    }
}

inline void write_family_map(const std::string& path, const std::vector<std::string>& lines,
                             const std::string& title) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write family map: " + path);
    out << "# " << title << "\n";
    out << "# format: <raw-label> <family>\n";
    for (const auto& line : lines) out << line << "\n";
}

}  // namespace sieve

#endif  // SIEVE_SYNTH_HPP
