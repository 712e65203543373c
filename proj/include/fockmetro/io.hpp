#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fock.hpp"

namespace fockmetro {

using json = nlohmann::json;

inline constexpr const char* kToolVersion = "fockmetro 0.1.0";

// 17 significant digits, '.' decimal regardless of locale
inline std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline json state_to_json(const TwoModeState& s) {
    json kets = json::array();
    for (int i = 0; i <= s.N; ++i)
        for (int j = 0; j <= s.N; ++j) {
            const cplx c = s(i, j);
            if (c == cplx{}) continue;
            kets.push_back({{"i", i}, {"j", j}, {"re", c.real()}, {"im", c.imag()}});
        }
    return {{"N", s.N}, {"norm", s.norm()}, {"kets", kets}};
}

inline TwoModeState state_from_json(const json& j) {
    TwoModeState s(j.at("N").get<int>());
    for (const auto& k : j.at("kets")) {
        const int a = k.at("i").get<int>(), b = k.at("j").get<int>();
        if (a < 0 || b < 0 || a > s.N || b > s.N) throw validation_error("ket index outside [0,N]");
        s(a, b) = cplx(k.at("re").get<double>(), k.value("im", 0.0));
    }
    return s;
}

// nonzero entries only, labelled by the two kets
inline json density_to_json(const DensityMatrix& r, double drop = 0.0) {
    json el = json::array();
    const int N = r.N;
    for (int a = 0; a < r.dim(); ++a)
        for (int b = 0; b < r.dim(); ++b) {
            const cplx c = r.m(a, b);
            if (std::abs(c) <= drop) continue;
            el.push_back({{"i", a / (N + 1)}, {"j", a % (N + 1)}, {"k", b / (N + 1)}, {"l", b % (N + 1)}, {"re", c.real()}, {"im", c.imag()}});
        }
    return {{"N", N}, {"trace", r.trace()}, {"entries", el}};
}

inline DensityMatrix density_from_json(const json& j) {
    DensityMatrix r(j.at("N").get<int>());
    for (const auto& e : j.at("entries"))
        r(e.at("i").get<int>(), e.at("j").get<int>(), e.at("k").get<int>(), e.at("l").get<int>()) =
            cplx(e.at("re").get<double>(), e.value("im", 0.0));
    return r;
}

inline std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct RunManifest {
    std::string command;
    json parameters = json::object();
    std::uint64_t seed = 0;
    std::string tool_version = kToolVersion;
    std::string timestamp;

    json to_json() const {
        return {{"command", command}, {"parameters", parameters}, {"seed", seed}, {"tool_version", tool_version}, {"timestamp", timestamp}};
    }

    static RunManifest from_json(const json& j) {
        RunManifest m;
        m.command = j.at("command").get<std::string>();
        m.parameters = j.at("parameters");
        m.seed = j.at("seed").get<std::uint64_t>();
        m.tool_version = j.at("tool_version").get<std::string>();
        m.timestamp = j.at("timestamp").get<std::string>();
        return m;
    }

    bool operator==(const RunManifest& o) const {
        return command == o.command && parameters == o.parameters && seed == o.seed && tool_version == o.tool_version &&
               timestamp == o.timestamp;
    }
};

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw validation_error("cannot open '" + path + "' for writing");
    f << text;
}

inline std::string read_text(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw validation_error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// CSV builder; every double goes through fmt17
class Csv {
public:
    explicit Csv(const std::vector<std::string>& header) : cols_(header.size()) {
        for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
        out_ << '\n';
    }
    Csv& cell(double x) { return put(fmt17(x)); }
    Csv& cell(long long x) { return put(std::to_string(x)); }
    Csv& cell(int x) { return put(std::to_string(x)); }
    Csv& cell(const std::string& s) { return put(s); }
    Csv& cell(const char* s) { return put(s); }
    std::string str() const { return out_.str(); }

private:
    Csv& put(const std::string& s) {
        out_ << (n_ ? "," : "") << s;
        if (++n_ == cols_) {
            out_ << '\n';
            n_ = 0;
        }
        return *this;
    }
    std::size_t cols_, n_ = 0;
    std::ostringstream out_;
};

}  // namespace fockmetro
