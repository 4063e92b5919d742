#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>
#include <oneapi/tbb/blocked_range.h>
#include <oneapi/tbb/global_control.h>
#include <oneapi/tbb/parallel_for.h>
#include <oneapi/tbb/task_arena.h>

namespace levy_she::runner {

// A task that failed inside the pool, identified by its index (replica or sweep cell).
struct TaskFault : std::runtime_error {
    TaskFault(std::size_t index, const std::string& msg)
        : std::runtime_error("task " + std::to_string(index) + ": " + msg), index(index) {}
    std::size_t index;
};

// Runs fn(i) for i in [0, n) on a work-stealing pool of the given size. Callers write results
// into slot i, so aggregation order never depends on scheduling. The lowest failing index wins.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    std::vector<std::string> errors(n);
    std::vector<char> failed(n, 0);
    auto body = [&](const tbb::blocked_range<std::size_t>& r) {
        for (std::size_t i = r.begin(); i != r.end(); ++i) {
            try {
                fn(i);
            } catch (const std::exception& e) {
                errors[i] = e.what();
                failed[i] = 1;
            }
        }
    };
    if (threads <= 1) {
        body(tbb::blocked_range<std::size_t>(0, n));
    } else {
        // Lift the default cap (hardware concurrency) so the requested size is honored.
        tbb::global_control cap(tbb::global_control::max_allowed_parallelism, static_cast<std::size_t>(threads));
        tbb::task_arena arena(threads);
        arena.execute([&] { tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n, 1), body); });
    }
    for (std::size_t i = 0; i < n; ++i)
        if (failed[i]) throw TaskFault(i, errors[i]);
}

using Cell = std::variant<std::monostate, std::string, double, long long, bool>;

inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string format_cell(const Cell& c) {
    struct {
        std::string operator()(std::monostate) const { return ""; }
        std::string operator()(const std::string& s) const { return s; }
        std::string operator()(double v) const { return format_double(v); }
        std::string operator()(long long v) const { return std::to_string(v); }
        std::string operator()(bool v) const { return v ? "true" : "false"; }
    } visit;
    return std::visit(visit, c);
}

inline std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + '"';
}

// Rows with provenance columns (config_hash, seed, module_version) prepended on output.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void add(std::vector<Cell> row) {
        if (row.size() != columns.size()) throw std::logic_error("row width does not match the header");
        rows.push_back(std::move(row));
    }

    std::string to_csv(const std::string& config_hash, std::uint64_t seed, const std::string& module_version) const {
        std::ostringstream os;
        os << "config_hash,seed,module_version";
        for (const auto& c : columns) os << ',' << csv_quote(c);
        os << "\r\n";
        const std::string prefix = csv_quote(config_hash) + ',' + std::to_string(seed) + ',' + csv_quote(module_version);
        for (const auto& r : rows) {
            os << prefix;
            for (const auto& c : r) os << ',' << csv_quote(format_cell(c));
            os << "\r\n";
        }
        return os.str();
    }
};

// RFC-4180 reader for the files written above.
inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> out;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false, any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char ch = text[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += ch;
            }
            continue;
        }
        if (ch == '"') {
            quoted = true;
            any = true;
        } else if (ch == ',') {
            row.push_back(std::move(field));
            field.clear();
            any = true;
        } else if (ch == '\n' || ch == '\r') {
            if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            if (any || !field.empty()) {
                row.push_back(std::move(field));
                out.push_back(std::move(row));
            }
            row.clear();
            field.clear();
            any = false;
        } else {
            field += ch;
            any = true;
        }
    }
    if (any || !field.empty()) {
        row.push_back(std::move(field));
        out.push_back(std::move(row));
    }
    return out;
}

// Temp file plus rename in the target directory.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

struct Series {
    std::string label;
    std::vector<double> x, y;
    bool dashed = false;
};

struct Plot {
    std::string title, xlabel, ylabel;
    std::vector<Series> series;
    bool logx = false, logy = false;
};

// Line chart written directly as SVG.
inline std::string render_svg(const Plot& p) {
    const double W = 640, H = 420, l = 70, r = 170, t = 40, b = 55;
    auto tx = [&](double v) { return p.logx ? std::log10(v) : v; };
    auto ty = [&](double v) { return p.logy ? std::log10(v) : v; };
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : p.series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            const double a = tx(s.x[i]), c = ty(s.y[i]);
            if (!std::isfinite(a) || !std::isfinite(c)) continue;
            x0 = std::min(x0, a);
            x1 = std::max(x1, a);
            y0 = std::min(y0, c);
            y1 = std::max(y1, c);
        }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y1 = y0 + 1;
    auto px = [&](double a) { return l + (a - x0) / (x1 - x0) * (W - l - r); };
    auto py = [&](double c) { return H - b - (c - y0) / (y1 - y0) * (H - t - b); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

    std::ostringstream os;
    os.precision(6);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << p.title << "</text>\n";
    os << "<rect x=\"" << l << "\" y=\"" << t << "\" width=\"" << W - l - r << "\" height=\"" << H - t - b
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double a = x0 + (x1 - x0) * i / 4.0, c = y0 + (y1 - y0) * i / 4.0;
        os << "<text x=\"" << px(a) << "\" y=\"" << H - b + 16 << "\" text-anchor=\"middle\">"
           << (p.logx ? "1e" : "") << format_double(std::round(a * 1000.0) / 1000.0) << "</text>\n";
        os << "<text x=\"" << l - 6 << "\" y=\"" << py(c) + 4 << "\" text-anchor=\"end\">" << (p.logy ? "1e" : "")
           << format_double(std::round(c * 1000.0) / 1000.0) << "</text>\n";
    }
    os << "<text x=\"" << l + (W - l - r) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << p.xlabel << "</text>\n";
    os << "<text transform=\"translate(16," << t + (H - t - b) / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << p.ylabel
       << "</text>\n";
    for (std::size_t k = 0; k < p.series.size(); ++k) {
        const auto& s = p.series[k];
        const char* col = colors[k % 8];
        os << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\"" << (s.dashed ? " stroke-dasharray=\"5,3\"" : "")
           << " points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            const double a = tx(s.x[i]), c = ty(s.y[i]);
            if (std::isfinite(a) && std::isfinite(c)) os << px(a) << ',' << py(c) << ' ';
        }
        os << "\"/>\n";
        const double ly = t + 14 + 18 * static_cast<double>(k);
        os << "<line x1=\"" << W - r + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - r + 30 << "\" y2=\"" << ly << "\" stroke=\"" << col
           << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << W - r + 35 << "\" y=\"" << ly + 4 << "\">" << s.label << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace levy_she::runner
