#pragma once

#include "maeanom/mae.hpp"
#include "maeanom/types.hpp"

#include <filesystem>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace maeanom {

struct ScoredEntry {
    std::string sample_id;
    double score = 0.0;
    int label = 0;  // 1 = abnormal
};

using ScoredSet = std::vector<ScoredEntry>;

struct RocResult {
    std::vector<double> thresholds;  // descending; first is +inf for the (0, 0) point
    std::vector<double> fpr;
    std::vector<double> tpr;
    double auroc = 0.0;
};

/// One operating point per distinct score (ties grouped) plus the (0, 0)
/// start. Throws InvalidArgument unless both labels are present.
RocResult roc_curve(const ScoredSet& scores);

/// Trapezoidal area under roc_curve; equals the Mann-Whitney statistic with
/// ties counted as one half.
double auroc(const ScoredSet& scores);

/// Delimited "threshold fpr tpr" rows followed by an "auroc <value>" line.
void write_roc(std::ostream& out, const RocResult& roc);

/// "sample_id score label" per line.
void write_scores(std::ostream& out, const ScoredSet& scores);
ScoredSet read_scores(std::istream& in);
ScoredSet read_scores(const std::filesystem::path& path);

struct SsimParams {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;
};

/// Normalized 1D Gaussian taps.
Vector gaussian_window(int size, double sigma);

/// Mean SSIM over all fully-contained windows ("valid" placement).
double ssim(const Image& a, const Image& b, const SsimParams& params = {});

enum class AnomalyMeasure { mse, l1, ssim };

std::string to_string(AnomalyMeasure m);
AnomalyMeasure parse_anomaly_measure(const std::string& s);

/// Reconstruction-error score, larger = more anomalous (ssim uses 1 - SSIM).
double reconstruction_score(const Image& original, const Image& recon, AnomalyMeasure measure);

struct LabeledImage {
    std::string id;
    Image image;
    int label = 0;
};

/// Reconstructs each image (per-image seed derived from recon.seed and its
/// index) and scores it with the chosen measure.
ScoredSet baseline_scores(const MaeModel& mae, const std::vector<LabeledImage>& images, AnomalyMeasure measure,
                          const ReconstructOptions& recon);

}  // namespace maeanom
