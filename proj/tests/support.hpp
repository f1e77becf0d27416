#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace testing {

inline bool rel_close(double a, double b, double tol) {
    if (a == b) return true;
    return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b));
}

inline std::string golden_path(const std::string& name) { return std::string(NVMSIM_GOLDEN_DIR) + "/" + name; }

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// "key v1 v2 ..." lines, '#' comments.
inline std::map<std::string, std::vector<double>> read_golden_values(const std::string& name) {
    std::map<std::string, std::vector<double>> out;
    std::istringstream in(slurp(golden_path(name)));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        double v;
        while (ls >> v) out[key].push_back(v);
    }
    return out;
}

} // namespace testing
