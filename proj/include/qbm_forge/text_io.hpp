#ifndef QBM_FORGE_TEXT_IO_HPP
#define QBM_FORGE_TEXT_IO_HPP

#include <Eigen/Dense>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"

namespace qbm_forge::detail {

// %.17g prints doubles so that parsing recovers them bit-for-bit.
inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string fmt_vector(const Eigen::VectorXd& v) {
    std::string out;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) out += ' ';
        out += fmt(v[i]);
    }
    return out;
}

inline Eigen::VectorXd parse_vector(const std::string& line, Eigen::Index expected,
                                    const std::string& what) {
    std::istringstream in(line);
    std::vector<double> vals;
    double v;
    while (in >> v) vals.push_back(v);
    if (static_cast<Eigen::Index>(vals.size()) != expected)
        throw IoError(what + ": expected " + std::to_string(expected) + " values, got " +
                      std::to_string(vals.size()));
    return Eigen::Map<Eigen::VectorXd>(vals.data(), vals.size());
}

inline std::string expect_line(std::ifstream& in, const std::string& what) {
    std::string line;
    if (!std::getline(in, line)) throw IoError("unexpected end of file reading " + what);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

inline void expect_exact(std::ifstream& in, const std::string& literal) {
    const std::string line = expect_line(in, literal);
    if (line != literal) throw IoError("expected '" + literal + "', got '" + line + "'");
}

inline long long parse_int(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(s, &pos);
        if (pos != s.size()) throw IoError("trailing characters in " + what);
        return v;
    } catch (const IoError&) {
        throw;
    } catch (const std::exception&) {
        throw IoError("cannot parse integer for " + what + ": '" + s + "'");
    }
}

// "key value..." lines; returns the remainder after the key or throws.
inline std::string expect_keyword(std::ifstream& in, const std::string& key) {
    const std::string line = expect_line(in, key);
    if (line.rfind(key, 0) != 0)
        throw IoError("expected '" + key + "' line, got '" + line + "'");
    std::string rest = line.substr(key.size());
    if (!rest.empty() && rest.front() == ' ') rest.erase(0, 1);
    return rest;
}

} // namespace qbm_forge::detail

#endif
