#ifndef CANTIBEC_CSV_HPP
#define CANTIBEC_CSV_HPP

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>

namespace cantibec::csv {

// Scientific notation with 9 significant digits, e.g. 1.50000000e-06.
inline std::string number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.8e", v);
    return buf;
}

// Shortest text that parses back to exactly v.
inline std::string exact(double v) {
    char buf[32];
    for (int precision = 6; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof buf, "%.*g", precision, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

} // namespace cantibec::csv

#endif
