#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "rfc/cli.hpp"

namespace rfc::cli {

void write_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
    }
    fs::rename(tmp, path);
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

CsvTable& CsvTable::row() {
    rows_.emplace_back();
    return *this;
}

CsvTable& CsvTable::add(double v) {
    rows_.back().push_back(format_number(v));
    return *this;
}

CsvTable& CsvTable::add(std::size_t v) {
    rows_.back().push_back(std::to_string(v));
    return *this;
}

CsvTable& CsvTable::add(const std::string& v) {
    if (v.find_first_of(",\"\n") == std::string::npos) {
        rows_.back().push_back(v);
    } else {
        std::string q = "\"";
        for (char ch : v) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
        rows_.back().push_back(q + "\"");
    }
    return *this;
}

CsvTable& CsvTable::add(bool v) {
    rows_.back().push_back(v ? "true" : "false");
    return *this;
}

std::string CsvTable::str() const {
    std::string out;
    const auto line = [&out](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + cells[i];
        out += "\n";
    };
    line(header_);
    for (const auto& r : rows_) {
        if (r.size() != header_.size()) throw std::logic_error("CSV row width does not match the header");
        line(r);
    }
    return out;
}

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

std::string escape(const std::string& s) {
    std::string out;
    for (char ch : s) {
        switch (ch) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            default: out += ch;
        }
    }
    return out;
}

// viridis anchors
std::string colour_at(double f) {
    static const std::array<std::array<double, 3>, 5> stops = {
        {{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}}};
    f = std::clamp(f, 0.0, 1.0) * 4.0;
    const std::size_t i = std::min<std::size_t>(3, static_cast<std::size_t>(f));
    const double w = f - static_cast<double>(i);
    char buf[8];
    int c[3];
    for (int k = 0; k < 3; ++k) c[k] = static_cast<int>(std::lround(stops[i][k] * (1 - w) + stops[i + 1][k] * w));
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c[0], c[1], c[2]);
    return buf;
}

const char* kHead = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"480\" viewBox=\"0 0 720 480\">\n";

}  // namespace

std::string envelope_heatmap_svg(const Envelope& env, const std::string& title) {
    const double x0 = 80, y0 = 40, w = 520, h = 380;
    const auto nr = env.r_grid.size(), nt = env.t_grid.size();
    double lo = INFINITY, hi = -INFINITY;
    for (Eigen::Index i = 0; i < env.values.size(); ++i) {
        const double v = std::log1p(std::max(0.0, env.values.data()[i]));
        lo = std::min(lo, v), hi = std::max(hi, v);
    }
    const double span = hi > lo ? hi - lo : 1.0;
    std::ostringstream os;
    os << kHead << "<rect width=\"720\" height=\"480\" fill=\"white\"/>\n";
    os << "<text x=\"360\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << escape(title) << "</text>\n";
    const double cw = w / static_cast<double>(nt), ch = h / static_cast<double>(nr);
    for (std::size_t i = 0; i < nr; ++i)
        for (std::size_t j = 0; j < nt; ++j) {
            const double v = env.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            const double f = (std::log1p(std::max(0.0, v)) - lo) / span;
            os << "<rect x=\"" << fmt(x0 + cw * j) << "\" y=\"" << fmt(y0 + h - ch * (i + 1)) << "\" width=\""
               << fmt(cw + 0.5) << "\" height=\"" << fmt(ch + 0.5) << "\" fill=\"" << colour_at(f) << "\"/>\n";
        }
    // ticks at first, middle and last grid nodes
    for (std::size_t j : {std::size_t{0}, nt / 2, nt - 1})
        os << "<text x=\"" << fmt(x0 + cw * (j + 0.5)) << "\" y=\"" << fmt(y0 + h + 18)
           << "\" text-anchor=\"middle\" font-size=\"12\">" << fmt(env.t_grid[j]) << "</text>\n";
    for (std::size_t i : {std::size_t{0}, nr / 2, nr - 1})
        os << "<text x=\"" << fmt(x0 - 6) << "\" y=\"" << fmt(y0 + h - ch * (i + 0.5) + 4)
           << "\" text-anchor=\"end\" font-size=\"12\">" << fmt(env.r_grid[i]) << "</text>\n";
    os << "<text x=\"" << fmt(x0 + w / 2) << "\" y=\"" << fmt(y0 + h + 36)
       << "\" text-anchor=\"middle\" font-size=\"13\">t (grid index scale)</text>\n";
    os << "<text x=\"20\" y=\"" << fmt(y0 + h / 2) << "\" font-size=\"13\" transform=\"rotate(-90 20 "
       << fmt(y0 + h / 2) << ")\" text-anchor=\"middle\">r</text>\n";
    // colour bar
    for (int k = 0; k < 50; ++k)
        os << "<rect x=\"630\" y=\"" << fmt(y0 + h - (k + 1) * h / 50) << "\" width=\"20\" height=\""
           << fmt(h / 50 + 0.5) << "\" fill=\"" << colour_at(k / 49.0) << "\"/>\n";
    os << "<text x=\"656\" y=\"" << fmt(y0 + h) << "\" font-size=\"11\">" << fmt(std::expm1(lo)) << "</text>\n";
    os << "<text x=\"656\" y=\"" << fmt(y0 + 10) << "\" font-size=\"11\">" << fmt(std::expm1(hi)) << "</text>\n";
    os << "</svg>\n";
    return os.str();
}

std::string overlay_svg(const std::vector<Curve>& curves, const std::string& title, const std::string& y_label) {
    const double x0 = 80, y0 = 40, w = 600, h = 380;
    double tmax = 0.0, ymax = 0.0;
    for (const auto& c : curves) {
        for (double t : c.t) tmax = std::max(tmax, t);
        for (double y : c.y)
            if (std::isfinite(y)) ymax = std::max(ymax, y);
    }
    if (tmax <= 0.0) tmax = 1.0;
    if (ymax <= 0.0) ymax = 1.0;
    const auto X = [&](double t) { return x0 + w * t / tmax; };
    const auto Y = [&](double y) { return y0 + h - h * std::min(y, ymax) / ymax; };
    std::ostringstream os;
    os << kHead << "<rect width=\"720\" height=\"480\" fill=\"white\"/>\n";
    os << "<text x=\"360\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << escape(title) << "</text>\n";
    os << "<path d=\"M" << fmt(x0) << " " << fmt(y0) << " V" << fmt(y0 + h) << " H" << fmt(x0 + w)
       << "\" stroke=\"black\" fill=\"none\"/>\n";
    for (const auto& c : curves) {
        os << "<polyline fill=\"none\" stroke=\"" << c.colour << "\" stroke-width=\"1.5\""
           << (c.dashed ? " stroke-dasharray=\"6 4\"" : "") << " points=\"";
        for (std::size_t i = 0; i < c.t.size(); ++i) os << (i ? " " : "") << fmt(X(c.t[i])) << "," << fmt(Y(c.y[i]));
        os << "\"/>\n";
    }
    for (double f : {0.0, 0.5, 1.0}) {
        os << "<text x=\"" << fmt(X(f * tmax)) << "\" y=\"" << fmt(y0 + h + 18)
           << "\" text-anchor=\"middle\" font-size=\"12\">" << fmt(f * tmax) << "</text>\n";
        os << "<text x=\"" << fmt(x0 - 6) << "\" y=\"" << fmt(Y(f * ymax) + 4)
           << "\" text-anchor=\"end\" font-size=\"12\">" << fmt(f * ymax) << "</text>\n";
    }
    os << "<text x=\"" << fmt(x0 + w / 2) << "\" y=\"" << fmt(y0 + h + 36)
       << "\" text-anchor=\"middle\" font-size=\"13\">t</text>\n";
    os << "<text x=\"20\" y=\"" << fmt(y0 + h / 2) << "\" font-size=\"13\" transform=\"rotate(-90 20 "
       << fmt(y0 + h / 2) << ")\" text-anchor=\"middle\">" << escape(y_label) << "</text>\n";
    os << "<text x=\"" << fmt(x0 + w - 4) << "\" y=\"" << fmt(y0 + 14)
       << "\" text-anchor=\"end\" font-size=\"12\">solid: simulated, dashed: bound</text>\n";
    os << "</svg>\n";
    return os.str();
}

}  // namespace rfc::cli
