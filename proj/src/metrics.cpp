#include "maeanom/metrics.hpp"

#include "maeanom/text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>

namespace maeanom {

RocResult roc_curve(const ScoredSet& scores) {
    std::size_t positives = 0;
    for (const auto& e : scores) {
        if (e.label != 0 && e.label != 1) throw InvalidArgument("roc: labels must be 0 or 1");
        if (!std::isfinite(e.score)) throw InvalidArgument("roc: non-finite score for '" + e.sample_id + "'");
        positives += static_cast<std::size_t>(e.label);
    }
    const std::size_t negatives = scores.size() - positives;
    if (positives == 0 || negatives == 0) throw InvalidArgument("roc: both labels must be present");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a].score > scores[b].score; });

    RocResult roc;
    roc.thresholds.push_back(std::numeric_limits<double>::infinity());
    roc.fpr.push_back(0.0);
    roc.tpr.push_back(0.0);
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < order.size();) {
        const double threshold = scores[order[i]].score;
        while (i < order.size() && scores[order[i]].score == threshold) {
            if (scores[order[i]].label == 1) ++tp;
            else ++fp;
            ++i;
        }
        roc.thresholds.push_back(threshold);
        roc.fpr.push_back(static_cast<double>(fp) / static_cast<double>(negatives));
        roc.tpr.push_back(static_cast<double>(tp) / static_cast<double>(positives));
    }

    double area = 0.0;
    for (std::size_t i = 1; i < roc.fpr.size(); ++i) {
        area += (roc.fpr[i] - roc.fpr[i - 1]) * (roc.tpr[i] + roc.tpr[i - 1]) * 0.5;
    }
    roc.auroc = area;
    return roc;
}

double auroc(const ScoredSet& scores) { return roc_curve(scores).auroc; }

void write_roc(std::ostream& out, const RocResult& roc) {
    out << "# threshold fpr tpr\n";
    for (std::size_t i = 0; i < roc.fpr.size(); ++i) {
        out << (std::isinf(roc.thresholds[i]) ? std::string("inf") : text::format_double(roc.thresholds[i])) << ' '
            << text::format_double(roc.fpr[i]) << ' ' << text::format_double(roc.tpr[i]) << '\n';
    }
    out << "auroc " << text::format_double(roc.auroc) << '\n';
}

void write_scores(std::ostream& out, const ScoredSet& scores) {
    for (const auto& e : scores) out << e.sample_id << ' ' << text::format_double(e.score) << ' ' << e.label << '\n';
}

ScoredSet read_scores(std::istream& in) {
    ScoredSet out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = text::trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto f = text::split_ws(t);
        if (f.size() != 3) throw FormatError("scores line " + std::to_string(line_no) + ": expected 3 fields");
        out.push_back({f[0], text::parse_double(f[1], "score"), static_cast<int>(text::parse_int(f[2], "label"))});
    }
    return out;
}

ScoredSet read_scores(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scores file " + path.string());
    return read_scores(in);
}

// ---------------------------------------------------------------------------
// SSIM

Vector gaussian_window(int size, double sigma) {
    Vector g(size);
    const double center = (size - 1) / 2.0;
    for (int i = 0; i < size; ++i) g(i) = std::exp(-((i - center) * (i - center)) / (2.0 * sigma * sigma));
    return g / g.sum();
}

namespace {

Matrix filter_valid(const Matrix& x, const Vector& g) {
    const auto win = g.size();
    const auto out_rows = x.rows() - win + 1;
    const auto out_cols = x.cols() - win + 1;
    Matrix horizontal = Matrix::Zero(x.rows(), out_cols);
    for (Eigen::Index k = 0; k < win; ++k) horizontal += g(k) * x.middleCols(k, out_cols);
    Matrix out = Matrix::Zero(out_rows, out_cols);
    for (Eigen::Index k = 0; k < win; ++k) out += g(k) * horizontal.middleRows(k, out_rows);
    return out;
}

}  // namespace

double ssim(const Image& a, const Image& b, const SsimParams& params) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("ssim: image dimensions differ");
    if (a.rows() < params.window || a.cols() < params.window) {
        throw DimensionError("ssim: image " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                             " is smaller than the " + std::to_string(params.window) + "px window");
    }
    const Vector g = gaussian_window(params.window, params.sigma);
    const double c1 = std::pow(params.k1 * params.dynamic_range, 2);
    const double c2 = std::pow(params.k2 * params.dynamic_range, 2);

    const Matrix mu_a = filter_valid(a, g);
    const Matrix mu_b = filter_valid(b, g);
    const Matrix mu_aa = mu_a.cwiseProduct(mu_a);
    const Matrix mu_bb = mu_b.cwiseProduct(mu_b);
    const Matrix mu_ab = mu_a.cwiseProduct(mu_b);
    const Matrix var_a = filter_valid(a.cwiseProduct(a), g) - mu_aa;
    const Matrix var_b = filter_valid(b.cwiseProduct(b), g) - mu_bb;
    const Matrix cov = filter_valid(a.cwiseProduct(b), g) - mu_ab;

    const Matrix numer = ((2.0 * mu_ab).array() + c1) * ((2.0 * cov).array() + c2);
    const Matrix denom = ((mu_aa + mu_bb).array() + c1) * ((var_a + var_b).array() + c2);
    return (numer.array() / denom.array()).mean();
}

// ---------------------------------------------------------------------------
// Baselines

std::string to_string(AnomalyMeasure m) {
    switch (m) {
        case AnomalyMeasure::mse: return "mse";
        case AnomalyMeasure::l1: return "l1";
        case AnomalyMeasure::ssim: return "ssim";
    }
    return "?";
}

AnomalyMeasure parse_anomaly_measure(const std::string& s) {
    if (s == "mse") return AnomalyMeasure::mse;
    if (s == "l1") return AnomalyMeasure::l1;
    if (s == "ssim") return AnomalyMeasure::ssim;
    throw InvalidArgument("unknown anomaly measure '" + s + "' (mse, l1, ssim)");
}

double reconstruction_score(const Image& original, const Image& recon, AnomalyMeasure measure) {
    if (original.rows() != recon.rows() || original.cols() != recon.cols()) {
        throw DimensionError("reconstruction score: image dimensions differ");
    }
    switch (measure) {
        case AnomalyMeasure::mse: return (recon - original).array().square().mean();
        case AnomalyMeasure::l1: return (recon - original).array().abs().mean();
        case AnomalyMeasure::ssim: return 1.0 - ssim(original, recon);
    }
    return 0.0;
}

ScoredSet baseline_scores(const MaeModel& mae, const std::vector<LabeledImage>& images, AnomalyMeasure measure,
                          const ReconstructOptions& recon) {
    if (mae.trained_epochs <= 0) throw InvalidArgument("baseline scores: MAE model has not been trained");
    ScoredSet out;
    out.reserve(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) {
        ReconstructOptions r = recon;
        r.seed = derive_seed(recon.seed, {static_cast<std::uint64_t>(i)});
        const Image x_hat = reconstruct(mae, images[i].image, r).image;
        out.push_back({images[i].id, reconstruction_score(images[i].image, x_hat, measure), images[i].label});
    }
    return out;
}

}  // namespace maeanom
