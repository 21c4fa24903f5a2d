#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vicsfm/matching.hpp"
#include "vicsfm/reconstruction.hpp"

namespace vicsfm {

/// Mean match count between anchor frames and their next `window` successors.
struct MatchCurve {
    int window = 10;
    int samples = 0;                  // number of anchor groups averaged
    std::vector<double> mean_matches; // index i -> offset i+1
};

/// Slides anchor groups over an ordered sequence of per-frame feature sets:
/// each group matches its first frame against the following `window` frames,
/// and the counts are averaged per offset over all groups. Group starts are
/// spaced by `stride`; stride <= 0 means window + 1 (disjoint groups).
/// Throws std::invalid_argument when fewer than window + 1 frames are given
/// or window < 1.
MatchCurve anchor_match_curve(const std::vector<std::vector<Feature>>& frames, int window = 10,
                              int stride = 0, double ratio = 0.8);

/// One summary row: how much of an input sequence was registered and how
/// dense the result is.
struct MetricsRow {
    std::string label;
    int input_images = 0;
    int reconstructed_images = 0;
    double reconstructed_pct = 0.0; // 100*reconstructed/input, half-up, 2 decimals
    long points3d = 0;
    double avg_observations = 0.0; // observations per reconstructed image
};

/// 100*numerator/denominator rounded half-up to two decimals, rendered
/// locale-independently as e.g. "99.77%".
std::string format_percent(long numerator, long denominator);

/// Throws std::invalid_argument when input_count is not positive or is
/// smaller than the number of registered frames.
MetricsRow table_metrics(const Reconstruction& recon, int input_count,
                         const std::string& label);

struct MetricFlag {
    std::string metric;
    std::vector<int> winners; // row indices sharing the best value
    bool tie = false;         // more than one winner
};

struct CompareReport {
    std::vector<MetricsRow> rows;
    std::vector<MetricFlag> flags; // one per compared metric, higher-is-better
    std::string csv;               // side-by-side table with a winner column
};

/// Flags the winner per metric across rows (>= 2 required).
CompareReport compare_rows(const std::vector<MetricsRow>& rows);

/// metrics.csv: label,input_images,reconstructed_images,reconstructed_pct,
/// points3d,avg_observations. Numbers round-trip exactly.
void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::filesystem::path& path);
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);

/// curve.csv: offset,mean_matches,samples (header records window and samples).
void write_curve_csv(const MatchCurve& curve, const std::filesystem::path& path);

/// Standalone SVG line chart of the curve.
void write_curve_svg(const MatchCurve& curve, const std::filesystem::path& path);

}  // namespace vicsfm
