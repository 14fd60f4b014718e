#include "rkl/emit.hpp"

#include "rkl/error.hpp"
#include "rkl/text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace rkl {

namespace {

std::string opt(const std::optional<double>& v)
{
    return v ? format_real(*v) : std::string();
}

std::optional<double> parse_opt(const std::string& s)
{
    if (s.empty()) {
        return std::nullopt;
    }
    return parse_real(s);
}

std::size_t parse_count(const std::string& s)
{
    std::size_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw InvalidArgument("not a count: '" + s + "'");
    }
    return v;
}

std::string join_row(const std::vector<std::string>& fields)
{
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) {
            line += ',';
        }
        line += csv_escape(fields[i]);
    }
    line += '\n';
    return line;
}

std::string xml_escape(std::string_view s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&':
            out += "&amp;";
            break;
        case '<':
            out += "&lt;";
            break;
        case '>':
            out += "&gt;";
            break;
        case '"':
            out += "&quot;";
            break;
        default:
            out += c;
        }
    }
    return out;
}

std::string fmt(double v, int precision = 4)
{
    std::ostringstream os;
    os.precision(precision);
    os << v;
    return os.str();
}

const std::vector<std::string> kResultColumns{"N",         "replicate", "prior_label", "estimator",
                                              "sigma2_hat", "rel_error", "status",      "runtime_ms"};

} // namespace

std::string csv_escape(std::string_view field)
{
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) {
        return std::string(field);
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    out += '"';
    return out;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text)
{
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
            any = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
            any = true;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
                ++i;
            }
            if (any || !field.empty()) {
                row.push_back(std::move(field));
                rows.push_back(std::move(row));
            }
            field.clear();
            row.clear();
            any = false;
        } else {
            field += c;
            any = true;
        }
    }
    if (quoted) {
        throw InvalidArgument("unterminated quoted CSV field");
    }
    if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string to_csv(const ResultTable& table)
{
    std::string out = join_row(kResultColumns);
    for (const auto& r : table.rows) {
        out += join_row({std::to_string(r.N), std::to_string(r.replicate), r.prior_label, r.estimator,
                         opt(r.sigma2_hat), opt(r.rel_error), r.status, opt(r.runtime_ms)});
    }
    return out;
}

ResultTable result_table_from_csv(std::string_view text)
{
    const auto rows = parse_csv(text);
    if (rows.empty() || rows.front() != kResultColumns) {
        throw InvalidArgument("result CSV must start with the header N,replicate,prior_label,estimator,"
                              "sigma2_hat,rel_error,status,runtime_ms");
    }
    ResultTable table;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& f = rows[i];
        if (f.size() != kResultColumns.size()) {
            throw InvalidArgument("result CSV line " + std::to_string(i + 1) + " has " +
                                  std::to_string(f.size()) + " fields, expected " +
                                  std::to_string(kResultColumns.size()));
        }
        ResultRow r;
        r.N = parse_count(f[0]);
        r.replicate = parse_count(f[1]);
        r.prior_label = f[2];
        r.estimator = f[3];
        r.sigma2_hat = parse_opt(f[4]);
        r.rel_error = parse_opt(f[5]);
        r.status = f[6];
        r.runtime_ms = parse_opt(f[7]);
        table.rows.push_back(std::move(r));
    }
    return table;
}

std::string to_csv(const InvarianceTable& table)
{
    std::string out =
        join_row({"N", "replicate", "prior_label", "transform", "estimator", "direct", "transformed", "rel_diff", "status"});
    for (const auto& r : table.rows) {
        out += join_row({std::to_string(r.N), std::to_string(r.replicate), r.prior_label, r.transform, r.estimator,
                         opt(r.direct), opt(r.transformed), opt(r.rel_diff), r.status});
    }
    return out;
}

std::string to_csv(const TailMassTable& table)
{
    std::string out = join_row({"N", "replicate", "prior_label", "alpha", "s", "log10_fraction", "status"});
    for (const auto& r : table.rows) {
        out += join_row({std::to_string(r.N), std::to_string(r.replicate), r.prior_label, format_real(r.alpha),
                         format_real(r.s), opt(r.log10_fraction), r.status});
    }
    return out;
}

std::string to_csv(const std::vector<SummaryRow>& rows)
{
    std::string out = join_row({"N", "prior_label", "estimator", "ok", "failed", "median_sigma2", "median_abs_error"});
    for (const auto& r : rows) {
        out += join_row({std::to_string(r.N), r.prior_label, r.estimator, std::to_string(r.ok),
                         std::to_string(r.failed), opt(r.median_sigma2), opt(r.median_abs_error)});
    }
    return out;
}

std::string to_csv(const std::vector<SpreadRow>& rows)
{
    std::string out = join_row({"N", "estimator", "replicates", "median_spread", "max_spread"});
    for (const auto& r : rows) {
        out += join_row({std::to_string(r.N), r.estimator, std::to_string(r.replicates), opt(r.median_spread),
                         opt(r.max_spread)});
    }
    return out;
}

std::string svg_line_plot(const std::vector<PlotSeries>& series, const PlotSpec& spec)
{
    const double W = 720;
    const double H = 440;
    const double left = 70;
    const double right = 220;
    const double top = 40;
    const double bottom = 55;
    auto tx = [&](double x) { return spec.log_x ? std::log10(x) : x; };

    double xmin = INFINITY;
    double xmax = -INFINITY;
    double ymin = INFINITY;
    double ymax = -INFINITY;
    for (const auto& s : series) {
        for (const auto& [x, y] : s.points) {
            if (!std::isfinite(y) || (spec.log_x && !(x > 0.0))) {
                continue;
            }
            xmin = std::min(xmin, tx(x));
            xmax = std::max(xmax, tx(x));
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    }
    if (spec.hline) {
        ymin = std::min(ymin, *spec.hline);
        ymax = std::max(ymax, *spec.hline);
    }
    if (!std::isfinite(xmin)) {
        xmin = 0.0;
        xmax = 1.0;
    }
    if (!std::isfinite(ymin)) {
        ymin = 0.0;
        ymax = 1.0;
    }
    if (xmax - xmin < 1e-12) {
        xmin -= 0.5;
        xmax += 0.5;
    }
    const double pad = ymax - ymin < 1e-12 ? 0.5 : 0.08 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;
    const double pw = W - left - right;
    const double ph = H - top - bottom;
    auto px = [&](double x) { return left + (tx(x) - xmin) / (xmax - xmin) * pw; };
    auto pxr = [&](double u) { return left + (u - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return top + (ymax - y) / (ymax - ymin) * ph; };

    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                   "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    std::ostringstream o;
    o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
      << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << left << "\" y=\"22\" font-size=\"15\">" << xml_escape(spec.title) << "</text>\n";
    o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double y = ymin + (ymax - ymin) * i / 4.0;
        o << "<line x1=\"" << left - 4 << "\" y1=\"" << py(y) << "\" x2=\"" << left << "\" y2=\"" << py(y)
          << "\" stroke=\"black\"/>\n";
        o << "<text x=\"" << left - 6 << "\" y=\"" << py(y) + 4 << "\" text-anchor=\"end\">" << fmt(y) << "</text>\n";
    }
    if (spec.log_x) {
        for (int d = static_cast<int>(std::ceil(xmin - 1e-9)); d <= static_cast<int>(std::floor(xmax + 1e-9)); ++d) {
            o << "<line x1=\"" << pxr(d) << "\" y1=\"" << top + ph << "\" x2=\"" << pxr(d) << "\" y2=\"" << top + ph + 4
              << "\" stroke=\"black\"/>\n";
            o << "<text x=\"" << pxr(d) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">1e" << d
              << "</text>\n";
        }
    } else {
        for (int i = 0; i <= 4; ++i) {
            const double u = xmin + (xmax - xmin) * i / 4.0;
            o << "<text x=\"" << pxr(u) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << fmt(u)
              << "</text>\n";
        }
    }
    o << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">"
      << xml_escape(spec.x_label) << "</text>\n";
    o << "<text x=\"16\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << top + ph / 2 << ")\">" << xml_escape(spec.y_label) << "</text>\n";
    if (spec.hline) {
        o << "<line x1=\"" << left << "\" y1=\"" << py(*spec.hline) << "\" x2=\"" << left + pw << "\" y2=\""
          << py(*spec.hline) << "\" stroke=\"black\" stroke-dasharray=\"6 4\"/>\n";
        o << "<text x=\"" << left + pw + 6 << "\" y=\"" << py(*spec.hline) + 4 << "\">"
          << xml_escape(spec.hline_label) << "</text>\n";
    }
    for (std::size_t k = 0; k < series.size(); ++k) {
        const char* color = colors[k % 10];
        std::string pts;
        for (const auto& [x, y] : series[k].points) {
            if (!std::isfinite(y) || (spec.log_x && !(x > 0.0))) {
                continue;
            }
            pts += fmt(px(x), 6) + "," + fmt(py(y), 6) + " ";
            o << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        }
        if (!pts.empty()) {
            o << "<polyline points=\"" << pts << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n";
        }
        const double ly = top + 14 + 16.0 * static_cast<double>(k);
        o << "<line x1=\"" << left + pw + 10 << "\" y1=\"" << ly - 4 << "\" x2=\"" << left + pw + 28 << "\" y2=\""
          << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        o << "<text x=\"" << left + pw + 32 << "\" y=\"" << ly << "\" font-size=\"10\">" << xml_escape(series[k].name)
          << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

std::string svg_consistency_plot(const std::vector<SummaryRow>& summary, double true_sigma2, const std::string& title)
{
    std::vector<PlotSeries> series;
    std::map<std::string, std::size_t> index;
    for (const auto& r : summary) {
        const std::string name = r.estimator + " / " + r.prior_label;
        auto it = index.find(name);
        if (it == index.end()) {
            it = index.emplace(name, series.size()).first;
            series.push_back({name, {}});
        }
        if (r.median_sigma2) {
            series[it->second].points.emplace_back(static_cast<double>(r.N), *r.median_sigma2);
        }
    }
    PlotSpec spec;
    spec.title = title;
    spec.y_label = "median sigma2_hat";
    spec.hline = true_sigma2;
    spec.hline_label = "true sigma2";
    return svg_line_plot(series, spec);
}

nlohmann::json manifest(const ExperimentSpec& spec, const std::string& run_name, const std::vector<std::string>& files,
                        const nlohmann::json& summary)
{
    nlohmann::json j;
    j["schema"] = kManifestSchema;
    j["library_version"] = kLibraryVersion;
    j["run_name"] = run_name;
    j["kind"] = to_string(spec.kind);
    j["master_seed"] = spec.master_seed;
    j["spec"] = to_json(spec);
    j["files"] = files;
    j["summary"] = summary;
    return j;
}

void write_text_file(const std::filesystem::path& path, std::string_view content)
{
    std::error_code ec;
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) {
            throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
        }
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

std::string read_text_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace rkl
