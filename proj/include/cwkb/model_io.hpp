#pragma once

// Model files (JSON) and run manifests.

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "cwkb/symbol.hpp"

namespace cwkb {

using json = nlohmann::json;

namespace detail {

inline std::vector<int> split_key(const std::string& key, std::string* side = nullptr) {
    std::vector<int> out;
    std::stringstream ss(key);
    std::string part;
    while (std::getline(ss, part, ',')) {
        if (side && (part == "-" || part == "+")) {
            *side = part;
            continue;
        }
        try {
            std::size_t used = 0;
            out.push_back(std::stoi(part, &used));
            if (used != part.size()) throw std::invalid_argument(part);
        } catch (const std::exception&) {
            throw Error(ErrorCode::Schema, "bad key '" + key + "'");
        }
    }
    return out;
}

inline ExprMatrix read_matrix(const json& j, int d, const std::set<std::string>& names, const std::string& where) {
    if (!j.is_array() || int(j.size()) != d) throw Error(ErrorCode::Schema, where + ": expected a " + std::to_string(d) + "x" + std::to_string(d) + " array");
    ExprMatrix M(d);
    for (int i = 0; i < d; ++i) {
        if (!j[i].is_array() || int(j[i].size()) != d) throw Error(ErrorCode::Schema, where + ": bad row " + std::to_string(i));
        for (int k = 0; k < d; ++k) {
            const json& e = j[i][k];
            std::string text;
            if (e.is_string())
                text = e.get<std::string>();
            else if (e.is_number())
                text = e.dump();
            else
                throw Error(ErrorCode::Schema, where + ": entries must be strings or numbers");
            M(i, k) = expr::parse(text, names);
        }
    }
    return M;
}

template <class T>
T required(const json& j, const char* key) {
    if (!j.contains(key)) throw Error(ErrorCode::Schema, std::string("missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Schema, std::string("field '") + key + "': " + e.what());
    }
}

}  // namespace detail

/// Evaluate every coefficient on a 41 x 21 grid over [-X,X] x [-Y,Y]; any
/// non-finite value rejects the model.
inline void pole_screen(const Model& model) {
    const auto& s = model.spec();
    const double X = s.truncation, Y = s.strip_half_width;
    for (int a = 0; a < 41; ++a)
        for (int b = 0; b < 21; ++b) {
            const cplx z(-X + 2.0 * X * a / 40.0, -Y + 2.0 * Y * b / 20.0);
            for (auto& [key, M] : s.A) {
                CMatrix v;
                try {
                    v = model.coefficient(z, key.first, key.second);
                } catch (const Error&) {
                    throw Error(ErrorCode::PoleDetected, "A_" + std::to_string(key.first) + std::to_string(key.second) +
                                                             " not finite at (" + std::to_string(z.real()) + "," + std::to_string(z.imag()) + ")");
                }
                for (Eigen::Index i = 0; i < v.size(); ++i)
                    if (!expr::detail::finite(v.data()[i]))
                        throw Error(ErrorCode::PoleDetected, "pole at (" + std::to_string(z.real()) + "," + std::to_string(z.imag()) + ")");
            }
        }
}

inline ModelSpec parse_model(const json& j) {
    if (!j.is_object()) throw Error(ErrorCode::Schema, "model must be a JSON object");
    ModelSpec s;
    s.name = j.value("name", std::string("unnamed"));
    s.d = detail::required<int>(j, "d");
    s.m = detail::required<int>(j, "m");
    s.r = detail::required<int>(j, "r");
    if (s.d < 1 || s.m < 1) throw Error(ErrorCode::Schema, "d and m must be positive");
    if (s.r < 1) throw Error(ErrorCode::Schema, "r must be at least 1 (one time derivative is required)");
    s.delta = j.value("delta", 0.0);
    if (s.delta < 0) throw Error(ErrorCode::Schema, "delta must be non-negative");
    auto win = detail::required<std::vector<double>>(j, "energy_window");
    if (win.size() != 2 || !(win[0] < win[1])) throw Error(ErrorCode::Schema, "energy_window must be [lo, hi] with lo < hi");
    s.energy_window = {win[0], win[1]};
    s.strip_half_width = detail::required<double>(j, "strip_half_width");
    s.decay_exponent = detail::required<double>(j, "decay_exponent");
    s.truncation = detail::required<double>(j, "truncation");
    if (!(s.strip_half_width > 0) || !(s.truncation > 0)) throw Error(ErrorCode::Schema, "strip_half_width and truncation must be positive");
    if (!(s.decay_exponent > 0.5)) throw Error(ErrorCode::Schema, "decay_exponent must exceed 1/2");
    if (j.contains("params")) s.params = j.at("params").get<std::map<std::string, double>>();

    std::set<std::string> names{"x", "delta"}, limit_names{"delta"};
    for (auto& [k, v] : s.params) {
        names.insert(k);
        limit_names.insert(k);
    }
    if (!j.contains("A") || !j.at("A").is_object()) throw Error(ErrorCode::Schema, "missing field 'A'");
    for (auto& [key, val] : j.at("A").items()) {
        auto ln = detail::split_key(key);
        if (ln.size() != 2 || ln[0] < 0 || ln[0] > s.m || ln[1] < 0 || ln[1] > s.r) throw Error(ErrorCode::Schema, "bad A key '" + key + "'");
        s.A[{ln[0], ln[1]}] = detail::read_matrix(val, s.d, names, "A[" + key + "]");
    }
    if (!j.contains("A_limits") || !j.at("A_limits").is_object()) throw Error(ErrorCode::Schema, "missing field 'A_limits'");
    for (auto& [key, val] : j.at("A_limits").items()) {
        std::string side;
        auto ln = detail::split_key(key, &side);
        if (ln.size() != 2 || side.empty()) throw Error(ErrorCode::Schema, "bad A_limits key '" + key + "'");
        s.A_limits[{ln[0], ln[1], side == "+" ? 1 : -1}] = detail::read_matrix(val, s.d, limit_names, "A_limits[" + key + "]");
    }
    for (auto& [key, M] : s.A)
        for (int side : {-1, 1})
            if (!s.A_limits.count({key.first, key.second, side}))
                throw Error(ErrorCode::Schema, "A_limits lacks " + std::to_string(key.first) + "," + std::to_string(key.second) +
                                                   (side > 0 ? ",+" : ",-"));
    if (!s.A.count({s.m, 0}) && s.A.lower_bound({s.m, 0}) == s.A.end())
        throw Error(ErrorCode::Schema, "leading coefficient A_m* is absent");

    if (j.contains("flags")) {
        const json& f = j.at("flags");
        s.claims_ac = f.value("avoided_crossing", false);
        if (f.contains("quadratic_dispersion"))
            for (auto& q : f.at("quadratic_dispersion")) {
                if (!q.is_array() || q.size() != 2) throw Error(ErrorCode::Schema, "quadratic_dispersion entries are [mode, side]");
                const std::string side = q[1].get<std::string>();
                s.quadratic_dispersion.push_back({q[0].get<int>(), side == "+" ? 1 : -1});
            }
    }
    if (j.contains("density")) {
        const json& q = j.at("density");
        DensitySpec d;
        d.E0 = detail::required<double>(q, "E0");
        d.g = detail::required<double>(q, "g");
        d.G = detail::required<std::string>(q, "G");
        d.J = q.value("J", std::string("0"));
        d.P = q.value("P", std::string("1"));
        expr::parse(d.G, {"E"});
        expr::parse(d.J, {"E"});
        expr::parse(d.P, {"E", "eps"});
        s.density = d;
    }
    return s;
}

inline Model load_model_json(const json& j, bool screen = true) {
    Model m(parse_model(j));
    if (screen) pole_screen(m);
    return m;
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Schema, "cannot open model file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline Model load_model(const std::string& path) {
    const std::string text = read_text(path);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::Schema, std::string("invalid JSON: ") + e.what());
    }
    return load_model_json(j);
}

/// 64-bit FNV-1a, used to tag outputs with the model they came from.
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) out[i] = digits[v & 15];
    return out;
}

}  // namespace cwkb
