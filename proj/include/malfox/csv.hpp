#ifndef MALFOX_CSV_HPP
#define MALFOX_CSV_HPP

#include <cmath>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

namespace malfox {

/// RFC 4180 quoting: fields holding a comma, quote or line break are quoted,
/// with embedded quotes doubled.
inline std::string csv_field(std::string_view text)
{
    if (text.find_first_of(",\"\r\n") == std::string_view::npos)
        return std::string(text);
    std::string out = "\"";
    for (char c : text) {
        if (c == '"')
            out += '"';
        out += c;
    }
    return out + '"';
}

/// %.6g; NaN becomes an empty field.
inline std::string csv_number(double v)
{
    if (std::isnan(v))
        return {};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

/// Split one RFC 4180 record (no embedded line breaks).
inline std::vector<std::string> csv_split(std::string_view line)
{
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                fields.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                fields.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back();
        } else if (c != '\r') {
            fields.back() += c;
        }
    }
    return fields;
}

} // namespace malfox

#endif // MALFOX_CSV_HPP
