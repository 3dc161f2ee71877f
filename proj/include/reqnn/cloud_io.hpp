#pragma once

#include <charconv>
#include <fstream>
#include <sstream>

#include "reqnn/geometry.hpp"

namespace reqnn::io {

enum class CloudFormat { XyzAscii, Off, Csv };

inline CloudFormat format_from_path(const std::string& path) {
    const auto dot = path.rfind('.');
    const std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
    if (ext == "xyz" || ext == "txt") return CloudFormat::XyzAscii;
    if (ext == "off") return CloudFormat::Off;
    if (ext == "csv") return CloudFormat::Csv;
    throw ValueError("cannot infer point cloud format from '" + path + "'");
}

namespace detail {

/// Shortest decimal form that round-trips to the same double.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

[[noreturn]] inline void fail(const std::string& path, std::size_t line, const std::string& msg) {
    throw ParseError(path + ":" + std::to_string(line) + ": " + msg);
}

inline bool parse_double(const std::string& tok, double& out) {
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    const auto res = std::from_chars(first, last, out);
    return res.ec == std::errc{} && res.ptr == last;
}

inline std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> toks;
    std::istringstream is(line);
    std::string t;
    while (is >> t) toks.push_back(t);
    return toks;
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> toks;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            toks.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(ch))) {
            cur += ch;
        }
    }
    toks.push_back(cur);
    return toks;
}

inline Vec3 parse_triple(const std::vector<std::string>& toks, const std::string& path,
                         std::size_t line) {
    if (toks.size() < 3) fail(path, line, "expected 3 coordinates, got " +
                                              std::to_string(toks.size()));
    Vec3 p;
    if (!parse_double(toks[0], p.x) || !parse_double(toks[1], p.y) ||
        !parse_double(toks[2], p.z)) {
        fail(path, line, "malformed coordinate triple");
    }
    return p;
}

} // namespace detail

inline PointCloud load_cloud(const std::string& path, CloudFormat fmt) {
    std::ifstream is(path);
    if (!is) throw ValueError("cannot open '" + path + "'");
    std::vector<Vec3> pts;
    std::string line;
    std::size_t lineno = 0;

    if (fmt == CloudFormat::Off) {
        // Header: optional literal OFF, then "nv nf ne", then nv vertex lines.
        std::size_t nv = 0;
        bool have_counts = false;
        while (std::getline(is, line)) {
            ++lineno;
            auto toks = detail::split_ws(line);
            if (toks.empty() || toks[0].starts_with("#")) continue;
            if (toks[0] == "OFF") continue;
            if (!have_counts) {
                double v = 0;
                if (toks.size() < 3 || !detail::parse_double(toks[0], v) || v < 0) {
                    detail::fail(path, lineno, "expected vertex/face/edge counts");
                }
                nv = static_cast<std::size_t>(v);
                have_counts = true;
                continue;
            }
            if (pts.size() == nv) break; // faces follow, ignore
            pts.push_back(detail::parse_triple(toks, path, lineno));
        }
        if (!have_counts) detail::fail(path, lineno, "missing OFF header counts");
        if (pts.size() != nv) {
            detail::fail(path, lineno, "header promises " + std::to_string(nv) +
                                           " vertices, file has " + std::to_string(pts.size()));
        }
        return PointCloud::from_vectors(pts);
    }

    bool first_content = true;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        if (line[0] == '#') continue;
        auto toks = fmt == CloudFormat::Csv ? detail::split_csv(line) : detail::split_ws(line);
        if (fmt == CloudFormat::Csv && first_content) {
            // One optional non-numeric header row like "x,y,z".
            double v = 0;
            first_content = false;
            if (!toks.empty() && !detail::parse_double(toks[0], v)) continue;
        }
        first_content = false;
        pts.push_back(detail::parse_triple(toks, path, lineno));
    }
    if (pts.empty()) throw ParseError(path + ": no points found");
    return PointCloud::from_vectors(pts);
}

inline PointCloud load_cloud(const std::string& path) {
    return load_cloud(path, format_from_path(path));
}

inline void save_cloud(const std::string& path, const PointCloud& cloud, CloudFormat fmt) {
    std::ofstream os(path);
    if (!os) throw ValueError("cannot open '" + path + "' for writing");
    const auto pts = cloud.to_vectors();
    if (fmt == CloudFormat::Off) {
        os << "OFF\n" << pts.size() << " 0 0\n";
    }
    const char sep = fmt == CloudFormat::Csv ? ',' : ' ';
    for (const Vec3& p : pts) {
        os << detail::format_double(p.x) << sep << detail::format_double(p.y) << sep
           << detail::format_double(p.z) << "\n";
    }
    if (!os) throw ValueError("failed while writing '" + path + "'");
}

inline void save_cloud(const std::string& path, const PointCloud& cloud) {
    save_cloud(path, cloud, format_from_path(path));
}

} // namespace reqnn::io
