#include "nht/run.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace nht {

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string escape_xml(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

bool finite(const std::array<double, 2>& p) { return std::isfinite(p[0]) && std::isfinite(p[1]); }

}  // namespace

std::array<double, 2> portrait_coords(const ModelBundle& b, const std::string& kind, const Vec& z,
                                      double t) {
    const Chart& c = b.model.chart;
    const int n = c.n();
    if (kind == "r-t") {
        const int r = c.index("r"), tt = c.index("t");
        return {z[r >= 0 ? r : 0], tt >= 0 ? z[tt] : t};
    }
    // theta against eta / |xi|
    const int th = c.index("theta");
    const int pos = th >= 0 ? th : 0;
    const double nrm = z.tail(n).norm();
    return {z[pos], nrm > 0 ? z[n + pos] / nrm : 0.0};
}

std::string render_svg(const PortraitData& p) {
    const double W = 640, H = 480, L = 70, R = 20, T = 40, B = 50;
    double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
    auto grow = [&](const std::array<double, 2>& q) {
        if (!finite(q)) return;
        xmin = std::min(xmin, q[0]);
        xmax = std::max(xmax, q[0]);
        ymin = std::min(ymin, q[1]);
        ymax = std::max(ymax, q[1]);
    };
    for (const auto& c : p.curves)
        for (const auto& q : c) grow(q);
    for (const auto& q : p.gamma) grow(q);
    for (const auto& q : p.radial) grow(q);
    if (!(xmin <= xmax)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    if (xmax - xmin < 1e-12) xmin -= 0.5, xmax += 0.5;
    if (ymax - ymin < 1e-12) ymin -= 0.5, ymax += 0.5;
    const double px = 0.03 * (xmax - xmin), py = 0.03 * (ymax - ymin);
    xmin -= px, xmax += px, ymin -= py, ymax += py;
    auto X = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
    auto Y = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };

    const bool rt = p.kind == "r-t";
    const std::string xl = rt ? "r" : "theta", yl = rt ? "t" : "eta / |xi|";

    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << W << "\" height=\"" << H
       << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n"
       << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n"
       << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
       << escape_xml(p.title) << "</text>\n"
       << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = xmin + (xmax - xmin) * i / 4, yv = ymin + (ymax - ymin) * i / 4;
        os << "<text x=\"" << fmt(X(xv)) << "\" y=\"" << H - B + 16
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << fmt(xv) << "</text>\n"
           << "<text x=\"" << L - 6 << "\" y=\"" << fmt(Y(yv) + 3)
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << fmt(yv) << "</text>\n";
    }
    os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << xl << "</text>\n"
       << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       << "font-size=\"12\" transform=\"rotate(-90 16 " << (T + H - B) / 2 << ")\">" << yl << "</text>\n";

    os << "<g fill=\"none\" stroke=\"#3060a0\" stroke-width=\"1\">\n";
    for (const auto& c : p.curves) {
        // split at non-finite points and periodic jumps
        std::string pts;
        std::array<double, 2> prev{NAN, NAN};
        auto flush = [&]() {
            if (pts.find(' ') != std::string::npos) os << "<polyline points=\"" << pts << "\"/>\n";
            pts.clear();
        };
        for (const auto& q : c) {
            if (!finite(q)) {
                flush();
                prev = {NAN, NAN};
                continue;
            }
            if (finite(prev) && std::fabs(q[0] - prev[0]) > 0.5 * (xmax - xmin)) flush();
            if (!pts.empty()) pts += ' ';
            pts += fmt(X(q[0])) + "," + fmt(Y(q[1]));
            prev = q;
        }
        flush();
    }
    os << "</g>\n<g fill=\"#c03030\">\n";
    for (const auto& q : p.gamma)
        if (finite(q)) os << "<circle cx=\"" << fmt(X(q[0])) << "\" cy=\"" << fmt(Y(q[1])) << "\" r=\"2.5\"/>\n";
    os << "</g>\n<g fill=\"#30a050\">\n";
    for (const auto& q : p.radial)
        if (finite(q)) os << "<circle cx=\"" << fmt(X(q[0])) << "\" cy=\"" << fmt(Y(q[1])) << "\" r=\"2\"/>\n";
    os << "</g>\n</svg>\n";
    return os.str();
}

}  // namespace nht
