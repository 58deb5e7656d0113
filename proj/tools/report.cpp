#include "report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>

#include <Eigen/Dense>

#include "conceptgcn/errors.hpp"

namespace conceptgcn::cli {

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + '"';
}

DenseMatrix pca_project(const DenseMatrix& data, std::size_t components) {
    const std::size_t n = data.rows(), k = data.cols();
    if (n == 0 || components == 0 || components > k) {
        throw ContractError("pca_project: need rows and 1 <= components <= " + std::to_string(k));
    }
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const Eigen::Map<const RowMajor> x(data.values().data(), static_cast<Eigen::Index>(n),
                                       static_cast<Eigen::Index>(k));
    const Eigen::MatrixXd centred = x.rowwise() - x.colwise().mean();
    const Eigen::MatrixXd cov = centred.transpose() * centred / static_cast<double>(std::max<std::size_t>(n - 1, 1));
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw NumericError("pca_project: eigensolver failed");

    DenseMatrix out(n, components);
    for (std::size_t c = 0; c < components; ++c) {
        // Eigenvalues come in increasing order.
        Eigen::VectorXd axis = solver.eigenvectors().col(static_cast<Eigen::Index>(k - 1 - c));
        Eigen::Index peak = 0;
        axis.cwiseAbs().maxCoeff(&peak);
        if (axis(peak) < 0) axis = -axis;
        const Eigen::VectorXd scores = centred * axis;
        for (std::size_t i = 0; i < n; ++i) out(i, c) = scores(static_cast<Eigen::Index>(i));
    }
    return out;
}

namespace {

std::string fixed(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

struct Series {
    const char* name;
    const char* colour;
    double EpochRecord::*field;
};

void panel(std::string& svg, const MetricsLog& log, double x0, double y0, double w, double h,
           const char* label, const Series (&series)[2], bool unit_range) {
    const auto& recs = log.records();
    double lo = 0.0, hi = 1.0;
    if (!unit_range) {
        lo = hi = recs.front().*(series[0].field);
        for (const auto& r : recs) {
            for (const Series& s : series) {
                lo = std::min(lo, r.*(s.field));
                hi = std::max(hi, r.*(s.field));
            }
        }
        lo = std::min(lo, 0.0);
        if (hi <= lo) hi = lo + 1.0;
    }
    const double first = static_cast<double>(recs.front().epoch);
    const double span = std::max(1.0, static_cast<double>(recs.back().epoch) - first);
    auto px = [&](double epoch) { return x0 + (epoch - first) / span * w; };
    auto py = [&](double v) { return y0 + h - (v - lo) / (hi - lo) * h; };

    svg += "<rect x=\"" + fixed(x0) + "\" y=\"" + fixed(y0) + "\" width=\"" + fixed(w) +
           "\" height=\"" + fixed(h) + "\" fill=\"none\" stroke=\"#999\"/>\n";
    svg += "<text x=\"" + fixed(x0) + "\" y=\"" + fixed(y0 - 8) + "\">" + label + "</text>\n";
    svg += "<text x=\"" + fixed(x0 - 4) + "\" y=\"" + fixed(y0 + 4) +
           "\" text-anchor=\"end\">" + format_double(hi) + "</text>\n";
    svg += "<text x=\"" + fixed(x0 - 4) + "\" y=\"" + fixed(y0 + h) +
           "\" text-anchor=\"end\">" + format_double(lo) + "</text>\n";
    svg += "<text x=\"" + fixed(x0) + "\" y=\"" + fixed(y0 + h + 16) + "\">epoch " +
           std::to_string(recs.front().epoch) + "</text>\n";
    svg += "<text x=\"" + fixed(x0 + w) + "\" y=\"" + fixed(y0 + h + 16) +
           "\" text-anchor=\"end\">" + std::to_string(recs.back().epoch) + "</text>\n";
    double legend_y = y0 + 16;
    for (const Series& s : series) {
        svg += std::string("<polyline fill=\"none\" stroke=\"") + s.colour +
               "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < recs.size(); ++i) {
            if (i) svg += ' ';
            svg += fixed(px(static_cast<double>(recs[i].epoch))) + "," + fixed(py(recs[i].*(s.field)));
        }
        svg += "\"/>\n";
        svg += "<text x=\"" + fixed(x0 + w - 8) + "\" y=\"" + fixed(legend_y) +
               "\" text-anchor=\"end\" fill=\"" + s.colour + "\">" + s.name + "</text>\n";
        legend_y += 16;
    }
}

}  // namespace

std::string curves_svg(const MetricsLog& log, const std::string& title) {
    if (log.size() == 0) throw ContractError("curves_svg: empty metrics log");
    std::string svg =
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"960\" height=\"400\" "
        "font-family=\"sans-serif\" font-size=\"12\">\n";
    svg += "<text x=\"480\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">";
    for (char ch : title) {
        if (ch == '<') svg += "&lt;";
        else if (ch == '&') svg += "&amp;";
        else svg += ch;
    }
    svg += "</text>\n";
    const Series loss[2] = {{"train loss", "#1f77b4", &EpochRecord::train_loss},
                            {"val loss", "#d62728", &EpochRecord::val_loss}};
    const Series acc[2] = {{"train acc", "#1f77b4", &EpochRecord::train_acc},
                           {"val acc", "#d62728", &EpochRecord::val_acc}};
    panel(svg, log, 70, 50, 380, 300, "loss", loss, false);
    panel(svg, log, 550, 50, 380, 300, "accuracy", acc, true);
    svg += "</svg>\n";
    return svg;
}

}  // namespace conceptgcn::cli
