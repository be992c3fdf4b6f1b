#include "taskforge/json_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace taskforge {

std::string format_double(double v) {
    if (!std::isfinite(v)) {
        throw std::runtime_error("format_double: non-finite value");
    }
    if (v == 0.0) return "0"; // normalizes -0.0
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

namespace {

void escape_string(const std::string& s, std::string& out) {
    out += '"';
    for (char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\b': out += "\\b"; break;
        case '\f': out += "\\f"; break;
        case '\n': out += "\\n"; break;
        case '\r': out += "\\r"; break;
        case '\t': out += "\\t"; break;
        default:
            if (static_cast<unsigned char>(c) < 0x20) {
                char buf[8];
                std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                out += buf;
            } else {
                out += c;
            }
        }
    }
    out += '"';
}

void dump_rec(const Json& j, int indent, int depth, std::string& out) {
    const bool pretty = indent >= 0;
    auto newline = [&](int d) {
        if (pretty) {
            out += '\n';
            out.append(static_cast<size_t>(indent) * d, ' ');
        }
    };
    switch (j.type()) {
    case Json::value_t::null: out += "null"; break;
    case Json::value_t::boolean: out += j.get<bool>() ? "true" : "false"; break;
    case Json::value_t::number_integer:
        out += std::to_string(j.get<long long>());
        break;
    case Json::value_t::number_unsigned:
        out += std::to_string(j.get<unsigned long long>());
        break;
    case Json::value_t::number_float:
        out += format_double(j.get<double>());
        break;
    case Json::value_t::string:
        escape_string(j.get_ref<const std::string&>(), out);
        break;
    case Json::value_t::array: {
        if (j.empty()) { out += "[]"; break; }
        out += '[';
        bool first = true;
        for (const auto& el : j) {
            if (!first) out += ',';
            first = false;
            newline(depth + 1);
            dump_rec(el, indent, depth + 1, out);
        }
        newline(depth);
        out += ']';
        break;
    }
    case Json::value_t::object: {
        if (j.empty()) { out += "{}"; break; }
        out += '{';
        bool first = true;
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!first) out += ',';
            first = false;
            newline(depth + 1);
            escape_string(it.key(), out);
            out += pretty ? ": " : ":";
            dump_rec(it.value(), indent, depth + 1, out);
        }
        newline(depth);
        out += '}';
        break;
    }
    default:
        throw std::runtime_error("dump_canonical: unsupported value type");
    }
}

} // namespace

std::string dump_canonical(const Json& j, int indent) {
    std::string out;
    dump_rec(j, indent, 0, out);
    if (indent >= 0) out += '\n';
    return out;
}

Json parse_json(const std::string& text) { return Json::parse(text); }

Json load_json_file(const std::string& path) {
    return parse_json(read_text_file(path));
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IOFailure("cannot open for writing: " + path);
    f << content;
    if (!f) throw IOFailure("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IOFailure("cannot open for reading: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace taskforge
