#include "lprisma/jsonutil.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lprisma/errors.hpp"

namespace lprisma {

std::string format_sig12(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

namespace {

void escape_string(const std::string& s, std::string& out) {
    out.push_back('"');
    for (unsigned char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\b': out += "\\b"; break;
            case '\f': out += "\\f"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (c < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                    out += buf;
                } else {
                    out.push_back(static_cast<char>(c));
                }
        }
    }
    out.push_back('"');
}

void dump_rec(const nlohmann::json& j, std::string& out) {
    using value_t = nlohmann::json::value_t;
    switch (j.type()) {
        case value_t::null: out += "null"; break;
        case value_t::boolean: out += j.get<bool>() ? "true" : "false"; break;
        case value_t::number_integer: out += std::to_string(j.get<std::int64_t>()); break;
        case value_t::number_unsigned: out += std::to_string(j.get<std::uint64_t>()); break;
        case value_t::number_float: out += format_sig12(j.get<double>()); break;
        case value_t::string: escape_string(j.get_ref<const std::string&>(), out); break;
        case value_t::array: {
            out.push_back('[');
            bool first = true;
            for (const auto& el : j) {
                if (!first) out.push_back(',');
                first = false;
                dump_rec(el, out);
            }
            out.push_back(']');
            break;
        }
        case value_t::object: {
            // nlohmann::json objects iterate in sorted key order already
            out.push_back('{');
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) out.push_back(',');
                first = false;
                escape_string(it.key(), out);
                out.push_back(':');
                dump_rec(it.value(), out);
            }
            out.push_back('}');
            break;
        }
        default:
            throw Error("unsupported json type in canonical dump");
    }
}

}  // namespace

std::string dump_canonical(const nlohmann::json& j) {
    std::string out;
    dump_rec(j, out);
    return out;
}

void atomic_write(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open for writing: " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw Error("write failed: " + tmp.string());
    }
    fs::rename(tmp, target);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace lprisma
