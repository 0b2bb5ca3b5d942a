#include "midgap/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace fs = std::filesystem;

namespace midgap {

namespace {

std::string fmt(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

}  // namespace

void write_series_csv(const std::vector<MetricSeries>& series, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path);
    os << "model,t,psnr,ssim,count\n";
    for (const auto& s : series)
        for (const auto& p : s.points)
            os << s.model << "," << p.t << "," << fmt(p.psnr) << "," << fmt(p.ssim) << ","
               << p.count << "\n";
}

std::vector<MetricSeries> read_series_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot read " + path);
    std::string line;
    if (!std::getline(is, line) || line != "model,t,psnr,ssim,count")
        throw FormatError(path + ": not a metric series csv");
    std::vector<MetricSeries> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string model, t, psnr, ssim, count;
        std::getline(ss, model, ',');
        std::getline(ss, t, ',');
        std::getline(ss, psnr, ',');
        std::getline(ss, ssim, ',');
        std::getline(ss, count, ',');
        if (out.empty() || out.back().model != model) {
            out.emplace_back();
            out.back().model = model;
        }
        MetricPoint p;
        p.t = std::stoi(t);
        p.psnr = psnr == "inf" ? std::numeric_limits<double>::infinity() : std::stod(psnr);
        p.ssim = std::stod(ssim);
        p.count = std::stol(count);
        out.back().points.push_back(p);
    }
    return out;
}

namespace {

struct SvgSpec {
    std::string title;
    double y_min, y_max;
};

double metric_of(const MetricPoint& p, bool use_psnr) { return use_psnr ? p.psnr : p.ssim; }

void write_metric_svg(const std::vector<MetricSeries>& series, bool use_psnr,
                      const std::string& path) {
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};
    const int width = 640, height = 420, ml = 60, mr = 150, mt = 40, mb = 50;
    double x_min = 1e300, x_max = -1e300, y_min = 1e300, y_max = -1e300;
    for (const auto& s : series) {
        for (const auto& p : s.points) {
            double v = metric_of(p, use_psnr);
            if (std::isinf(v)) continue;
            x_min = std::min(x_min, static_cast<double>(p.t));
            x_max = std::max(x_max, static_cast<double>(p.t));
            y_min = std::min(y_min, v);
            y_max = std::max(y_max, v);
        }
    }
    if (x_min > x_max) {
        x_min = 0;
        x_max = 1;
        y_min = 0;
        y_max = 1;
    }
    if (y_max - y_min < 1e-9) {
        y_min -= 0.5;
        y_max += 0.5;
    }
    if (x_max - x_min < 1e-9) x_max = x_min + 1;
    auto sx = [&](double t) { return ml + (t - x_min) / (x_max - x_min) * (width - ml - mr); };
    auto sy = [&](double v) {
        return height - mb - (v - y_min) / (y_max - y_min) * (height - mt - mb);
    };
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path);
    char buf[256];
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
       << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    os << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    os << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
       << (use_psnr ? "PSNR (dB) per frame" : "SSIM per frame") << "</text>\n";
    // axes
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"black\"/>\n", ml,
                  height - mb, width - mr, height - mb);
    os << buf;
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"black\"/>\n", ml, mt, ml,
                  height - mb);
    os << buf;
    // y labels
    for (int i = 0; i <= 4; ++i) {
        double v = y_min + (y_max - y_min) * i / 4.0;
        std::snprintf(buf, sizeof(buf),
                      "<text x=\"%d\" y=\"%.1f\" text-anchor=\"end\" font-size=\"11\">%s</text>\n",
                      ml - 6, sy(v) + 4, fmt(v).c_str());
        os << buf;
    }
    // x labels: one per integer timestep
    for (int t = static_cast<int>(x_min); t <= static_cast<int>(x_max); ++t) {
        std::snprintf(
            buf, sizeof(buf),
            "<text x=\"%.1f\" y=\"%d\" text-anchor=\"middle\" font-size=\"11\">%d</text>\n", sx(t),
            height - mb + 16, t);
        os << buf;
    }
    os << "<text x=\"" << (ml + (width - ml - mr) / 2) << "\" y=\"" << height - 12
       << "\" text-anchor=\"middle\" font-size=\"12\">timestep t</text>\n";
    int idx = 0;
    for (const auto& s : series) {
        const char* color = palette[idx % 8];
        std::string pts;
        for (const auto& p : s.points) {
            double v = metric_of(p, use_psnr);
            if (std::isinf(v)) continue;
            std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", sx(p.t), sy(v));
            pts += buf;
        }
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\""
           << pts << "\"/>\n";
        std::snprintf(buf, sizeof(buf),
                      "<rect x=\"%d\" y=\"%d\" width=\"12\" height=\"12\" fill=\"%s\"/>\n",
                      width - mr + 10, mt + idx * 20, color);
        os << buf;
        os << "<text x=\"" << width - mr + 28 << "\" y=\"" << mt + idx * 20 + 10
           << "\" font-size=\"12\">" << s.model << "</text>\n";
        ++idx;
    }
    os << "</svg>\n";
}

// rows: ground truth then prediction; columns: timesteps; 1px separators
void write_strip(const MetricSeries& s, const std::string& path) {
    const FrameSequence& truth = s.sample_truth;
    const FrameSequence& pred = s.sample_pred;
    if (truth.length() == 0 || pred.length() != truth.length()) return;
    int c = truth.channels(), h = truth.height(), w = truth.width();
    int cols = truth.length();
    int gw = cols * (w + 1) - 1, gh = 2 * (h + 1) - 1;
    std::vector<double> grid(static_cast<long>(c) * gh * gw, 1.0);
    auto blit = [&](const Tensor& frame, int row, int col) {
        const auto& v = frame.values();
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    grid[(static_cast<long>(ch) * gh + row * (h + 1) + y) * gw + col * (w + 1) +
                         x] = v[(static_cast<long>(ch) * h + y) * w + x];
    };
    for (int t = 0; t < cols; ++t) {
        blit(truth.frames[t], 0, t);
        blit(pred.frames[t], 1, t);
    }
    FrameSequence one;
    one.frames.push_back(Tensor::from({c, gh, gw}, std::move(grid)));
    // reuse the frame writer through a single-frame directory-less write
    save_frame_dir(one, path);
}

}  // namespace

void write_report(const std::vector<MetricSeries>& series, const std::string& out_dir) {
    if (series.empty()) throw RangeError("report needs at least one metric series");
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (!fs::is_directory(out_dir)) throw IoError("cannot create report directory " + out_dir);
    write_series_csv(series, (fs::path(out_dir) / "metrics.csv").string());
    write_metric_svg(series, true, (fs::path(out_dir) / "psnr.svg").string());
    write_metric_svg(series, false, (fs::path(out_dir) / "ssim.svg").string());
    for (const auto& s : series)
        if (s.sample_truth.length() > 0)
            write_strip(s, (fs::path(out_dir) / ("strip_" + s.model)).string());
}

}  // namespace midgap
