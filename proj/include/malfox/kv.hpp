#ifndef MALFOX_KV_HPP
#define MALFOX_KV_HPP

#include <malfox/error.hpp>

#include <charconv>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace malfox {

/// Line-oriented `key = value` document. A `#` that begins a line or follows
/// whitespace and precedes whitespace (or the line end) starts a comment; keys may repeat.
class kv_document {
public:
    static kv_document parse(const std::string& text)
    {
        kv_document doc;
        std::istringstream in(text);
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            line.erase(comment_start(line));
            auto trimmed = trim(line);
            if (trimmed.empty())
                continue;
            auto eq = trimmed.find('=');
            if (eq == std::string::npos)
                throw error(errc::format_error, "line " + std::to_string(line_no) + ": expected key = value");
            auto key = trim(trimmed.substr(0, eq));
            if (key.empty())
                throw error(errc::format_error, "line " + std::to_string(line_no) + ": empty key");
            doc.entries_.emplace_back(key, trim(trimmed.substr(eq + 1)));
        }
        return doc;
    }

    static std::size_t comment_start(const std::string& line)
    {
        const auto first = line.find_first_not_of(" \t");
        if (first != std::string::npos && line[first] == '#')
            return first;
        for (std::size_t i = 1; i < line.size(); ++i) {
            if (line[i] != '#' || (line[i - 1] != ' ' && line[i - 1] != '\t'))
                continue;
            if (i + 1 == line.size() || line[i + 1] == ' ' || line[i + 1] == '\t')
                return i;
        }
        return line.size();
    }

    void set(const std::string& key, const std::string& value) { entries_.emplace_back(key, value); }

    bool contains(const std::string& key) const { return find(key).has_value(); }

    /// Last occurrence wins for scalar lookups.
    std::optional<std::string> find(const std::string& key) const
    {
        for (auto it = entries_.rbegin(); it != entries_.rend(); ++it)
            if (it->first == key)
                return it->second;
        return std::nullopt;
    }

    std::vector<std::string> all(const std::string& key) const
    {
        std::vector<std::string> out;
        for (const auto& [k, v] : entries_)
            if (k == key)
                out.push_back(v);
        return out;
    }

    std::string get_string(const std::string& key, const std::string& fallback) const
    {
        return find(key).value_or(fallback);
    }

    std::string require_string(const std::string& key) const
    {
        auto v = find(key);
        if (!v)
            throw error(errc::config_invalid, "missing key '" + key + "'");
        return *v;
    }

    template <typename Int>
    Int get_int(const std::string& key, Int fallback) const
    {
        auto v = find(key);
        if (!v)
            return fallback;
        return parse_int<Int>(key, *v);
    }

    double get_double(const std::string& key, double fallback) const
    {
        auto v = find(key);
        if (!v)
            return fallback;
        try {
            std::size_t used = 0;
            double d = std::stod(*v, &used);
            if (used != v->size())
                throw std::invalid_argument("trailing");
            return d;
        } catch (const std::exception&) {
            throw error(errc::config_invalid, "key '" + key + "': not a number: " + *v);
        }
    }

    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

    static std::string trim(const std::string& s)
    {
        auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos)
            return {};
        auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }

    template <typename Int>
    static Int parse_int(const std::string& key, const std::string& text)
    {
        Int value{};
        int base = 10;
        std::string_view digits = text;
        if (digits.size() > 2 && digits[0] == '0' && (digits[1] == 'x' || digits[1] == 'X')) {
            base = 16;
            digits.remove_prefix(2);
        }
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value, base);
        if (ec != std::errc() || ptr != digits.data() + digits.size())
            throw error(errc::config_invalid, "key '" + key + "': not an integer: " + text);
        return value;
    }

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

} // namespace malfox

#endif // MALFOX_KV_HPP
