#include "maeanom/plot.hpp"

#include "maeanom/image_io.hpp"
#include "maeanom/text.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace maeanom {

namespace {

constexpr int kLeft = 72, kRight = 24, kTop = 44, kBottom = 64;
constexpr auto kFont = cv::FONT_HERSHEY_SIMPLEX;

cv::Scalar bgr(const std::array<std::uint8_t, 3>& rgb) { return {double(rgb[2]), double(rgb[1]), double(rgb[0])}; }

std::string tick_text(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

// Roughly five ticks at 1/2/5 multiples of a power of ten.
std::vector<double> nice_ticks(double lo, double hi) {
    const double span = hi - lo;
    if (!(span > 0)) return {lo};
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
        step = m * mag;
        if (step >= raw) break;
    }
    std::vector<double> ticks;
    for (double t = std::ceil(lo / step - 1e-9) * step; t <= hi + 1e-9 * step; t += step) {
        ticks.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
    }
    return ticks;
}

void put_centered(cv::Mat& img, const std::string& s, cv::Point at, double scale, int thickness = 1) {
    int baseline = 0;
    const cv::Size size = cv::getTextSize(s, kFont, scale, thickness, &baseline);
    cv::putText(img, s, {at.x - size.width / 2, at.y + size.height / 2}, kFont, scale, cv::Scalar(0, 0, 0), thickness,
                cv::LINE_AA);
}

}  // namespace

RgbImage render_plot(const PlotSpec& spec) {
    if (spec.width < kLeft + kRight + 40 || spec.height < kTop + kBottom + 40) {
        throw InvalidArgument("plot: canvas too small");
    }
    if (!(spec.x_max > spec.x_min) || !(spec.y_max > spec.y_min)) throw InvalidArgument("plot: empty axis range");

    cv::Mat img(spec.height, spec.width, CV_8UC3, cv::Scalar(255, 255, 255));
    const int x0 = kLeft, x1 = spec.width - kRight, y0 = spec.height - kBottom, y1 = kTop;
    auto px = [&](double x) { return x0 + (x - spec.x_min) / (spec.x_max - spec.x_min) * (x1 - x0); };
    auto py = [&](double y) { return y0 - (y - spec.y_min) / (spec.y_max - spec.y_min) * (y0 - y1); };
    // Sub-pixel drawing: coordinates carry 4 fractional bits.
    constexpr int kShift = 4;
    auto pt = [&](double x, double y) {
        return cv::Point(static_cast<int>(std::lround(px(x) * (1 << kShift))),
                         static_cast<int>(std::lround(py(y) * (1 << kShift))));
    };

    const cv::Scalar grid(225, 225, 225), axis(0, 0, 0);
    std::vector<std::pair<double, std::string>> xticks;
    if (!spec.x_tick_labels.empty()) {
        for (std::size_t i = 0; i < spec.x_tick_labels.size(); ++i) xticks.emplace_back(double(i), spec.x_tick_labels[i]);
    } else {
        for (double t : nice_ticks(spec.x_min, spec.x_max)) xticks.emplace_back(t, tick_text(t));
    }
    for (const auto& [t, label] : xticks) {
        const int x = static_cast<int>(std::lround(px(t)));
        cv::line(img, {x, y1}, {x, y0}, grid, 1);
        cv::line(img, {x, y0}, {x, y0 + 5}, axis, 1);
        put_centered(img, label, {x, y0 + 16}, 0.4);
    }
    for (double t : nice_ticks(spec.y_min, spec.y_max)) {
        const int y = static_cast<int>(std::lround(py(t)));
        cv::line(img, {x0, y}, {x1, y}, grid, 1);
        cv::line(img, {x0 - 5, y}, {x0, y}, axis, 1);
        const std::string label = tick_text(t);
        int baseline = 0;
        const cv::Size size = cv::getTextSize(label, kFont, 0.4, 1, &baseline);
        cv::putText(img, label, {x0 - 8 - size.width, y + size.height / 2}, kFont, 0.4, axis, 1, cv::LINE_AA);
    }
    cv::rectangle(img, {x0, y1}, {x1, y0}, axis, 1);

    if (spec.diagonal) {
        const int dashes = 40;
        for (int i = 0; i < dashes; i += 2) {
            const double a = double(i) / dashes, b = double(i + 1) / dashes;
            const double xa = spec.x_min + a * (spec.x_max - spec.x_min), xb = spec.x_min + b * (spec.x_max - spec.x_min);
            cv::line(img, pt(xa, xa), pt(xb, xb), cv::Scalar(150, 150, 150), 1, cv::LINE_AA, kShift);
        }
    }

    for (const auto& s : spec.series) {
        if (s.x.size() != s.y.size()) throw DimensionError("plot: series x/y length mismatch");
        for (std::size_t i = 1; i < s.x.size(); ++i) {
            cv::line(img, pt(s.x[i - 1], s.y[i - 1]), pt(s.x[i], s.y[i]), bgr(s.rgb), 2, cv::LINE_AA, kShift);
        }
        if (s.markers) {
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                cv::circle(img, pt(s.x[i], s.y[i]), 4 << kShift, bgr(s.rgb), cv::FILLED, cv::LINE_AA, kShift);
            }
        }
    }

    // Legend, bottom-right inside the axes.
    int row = 0;
    for (auto it = spec.series.rbegin(); it != spec.series.rend(); ++it) {
        if (it->label.empty()) continue;
        int baseline = 0;
        const cv::Size size = cv::getTextSize(it->label, kFont, 0.45, 1, &baseline);
        const int y = y0 - 14 - row * 20;
        const int xt = x1 - 12 - size.width;
        cv::line(img, {xt - 30, y - size.height / 2}, {xt - 6, y - size.height / 2}, bgr(it->rgb), 2, cv::LINE_AA);
        cv::putText(img, it->label, {xt, y}, kFont, 0.45, axis, 1, cv::LINE_AA);
        ++row;
    }

    put_centered(img, spec.title, {(x0 + x1) / 2, kTop / 2}, 0.55, 1);
    put_centered(img, spec.x_label, {(x0 + x1) / 2, spec.height - 22}, 0.5);
    if (!spec.y_label.empty()) {
        int baseline = 0;
        const cv::Size size = cv::getTextSize(spec.y_label, kFont, 0.5, 1, &baseline);
        cv::Mat label(size.height + baseline + 6, size.width + 6, CV_8UC3, cv::Scalar(255, 255, 255));
        cv::putText(label, spec.y_label, {3, size.height + 2}, kFont, 0.5, axis, 1, cv::LINE_AA);
        cv::Mat rotated;
        cv::rotate(label, rotated, cv::ROTATE_90_COUNTERCLOCKWISE);
        const int cy = (y0 + y1) / 2 - rotated.rows / 2;
        if (cy >= 0 && cy + rotated.rows <= img.rows && 6 + rotated.cols <= img.cols) {
            rotated.copyTo(img(cv::Rect(6, cy, rotated.cols, rotated.rows)));
        }
    }

    RgbImage out;
    out.width = img.cols;
    out.height = img.rows;
    out.pixels.resize(static_cast<std::size_t>(img.cols) * img.rows * 3);
    for (int r = 0; r < img.rows; ++r) {
        const auto* src = img.ptr<cv::Vec3b>(r);
        for (int c = 0; c < img.cols; ++c) {
            auto* dst = &out.pixels[(static_cast<std::size_t>(r) * img.cols + c) * 3];
            dst[0] = src[c][2];
            dst[1] = src[c][1];
            dst[2] = src[c][0];
        }
    }
    return out;
}

PlotSpec roc_plot(const RocResult& roc, const std::string& title) {
    PlotSpec spec;
    spec.title = title;
    spec.x_label = "false positive rate";
    spec.y_label = "true positive rate";
    spec.diagonal = true;
    PlotSeries s;
    s.x = roc.fpr;
    s.y = roc.tpr;
    char buf[64];
    std::snprintf(buf, sizeof buf, "AUROC = %.4f", roc.auroc);
    s.label = buf;
    spec.series.push_back(std::move(s));
    return spec;
}

PlotSpec ablation_plot(const std::string& axis, const std::vector<std::string>& values,
                       const std::vector<double>& aurocs) {
    if (values.size() != aurocs.size() || values.empty()) throw InvalidArgument("ablation plot: values/aurocs mismatch");
    PlotSpec spec;
    spec.title = "AUROC vs " + axis;
    spec.x_label = axis;
    spec.y_label = "AUROC";
    PlotSeries s;
    s.markers = true;
    s.y = aurocs;

    bool numeric = true;
    for (const auto& v : values) {
        try {
            s.x.push_back(text::parse_double(v, axis));
        } catch (const FormatError&) {
            numeric = false;
            break;
        }
    }
    if (numeric && values.size() > 1) {
        const auto [lo, hi] = std::minmax_element(s.x.begin(), s.x.end());
        const double pad = 0.05 * (*hi - *lo);
        spec.x_min = *lo - pad;
        spec.x_max = *hi + pad;
        if (!(spec.x_max > spec.x_min)) numeric = false;
    } else {
        numeric = false;
    }
    if (!numeric) {
        s.x.clear();
        for (std::size_t i = 0; i < values.size(); ++i) s.x.push_back(double(i));
        spec.x_tick_labels = values;
        spec.x_min = -0.5;
        spec.x_max = double(values.size()) - 0.5;
    }
    const auto [ylo, yhi] = std::minmax_element(aurocs.begin(), aurocs.end());
    spec.y_min = std::max(0.0, std::floor((*ylo - 0.05) * 10.0) / 10.0);
    spec.y_max = std::min(1.0, std::ceil((*yhi + 0.05) * 10.0) / 10.0);
    if (!(spec.y_max > spec.y_min)) {
        spec.y_min = 0.0;
        spec.y_max = 1.0;
    }
    spec.series.push_back(std::move(s));
    return spec;
}

void write_plot_png(const std::filesystem::path& path, const PlotSpec& spec) {
    const RgbImage img = render_plot(spec);
    write_png_rgb(path, img.width, img.height, img.pixels);
}

std::vector<std::uint8_t> plot_png_bytes(const PlotSpec& spec) {
    const RgbImage img = render_plot(spec);
    return encode_png_rgb(img.width, img.height, img.pixels);
}

}  // namespace maeanom
