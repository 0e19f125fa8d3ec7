#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "voxatlas/volume.hpp"

namespace voxatlas {

enum class HausdorffVariant {
    full_set,  // distances over every voxel of each class set (the default)
    surface,   // restricted to 6-neighborhood boundary voxels, for comparison
};

/// 2|A n B| / (|A| + |B|). Both sets empty -> 1 (agreement on absence);
/// exactly one empty -> 0. Throws errc::alignment on geometry mismatch.
double dice(const LabelVolume& pred, const LabelVolume& gt, int tissue_class);

/// Symmetric Hausdorff distance in mm between the two class sets, Euclidean
/// between voxel centers with physical spacing. Either set empty ->
/// errc::undefined_metric.
double hausdorff(const LabelVolume& pred, const LabelVolume& gt, int tissue_class,
                 HausdorffVariant variant = HausdorffVariant::full_set);

/// |V_pred - V_gt| / V_gt * 100, volumes in mm^3. Empty ground-truth set ->
/// errc::undefined_metric.
double avd(const LabelVolume& pred, const LabelVolume& gt, int tissue_class);

struct ClassRow {
    std::optional<double> dsc;
    std::optional<double> hd_mm;
    std::optional<double> avd_pct;
};

/// Per-case metric table over the tissue classes CSF, GM, WM plus their
/// arithmetic mean. Undefined cells stay empty instead of aborting the
/// report; the mean of a metric is present only when all three classes are.
struct MetricsReport {
    std::array<ClassRow, 3> tissue;  // index 0 CSF, 1 GM, 2 WM
    ClassRow mean;
};

MetricsReport evaluate(const LabelVolume& pred, const LabelVolume& gt,
                       HausdorffVariant variant = HausdorffVariant::full_set);

struct CohortStats {
    double mean = 0.0;
    double stddev = 0.0;  // population standard deviation (divide by n)
    std::size_t count = 0;
};

/// Cohort aggregation: mean +/- population std per metric and class over the
/// cases where the cell is defined.
struct CohortSummary {
    // [metric: 0 dsc, 1 hd, 2 avd][class: 0 CSF, 1 GM, 2 WM, 3 mean-row]
    std::array<std::array<std::optional<CohortStats>, 4>, 3> cells;
};

CohortSummary summarize(std::span<const MetricsReport> cases);

/// CSV with columns case,class,dsc,hd_mm,avd_pct; one row per case and class
/// (csf, gm, wm, mean) followed by summary mean/std blocks when requested.
/// Undefined cells are left empty. Output is byte-stable for fixed inputs.
void write_metrics_csv(const std::filesystem::path& path, std::span<const std::string> case_ids,
                       std::span<const MetricsReport> cases, bool with_summary = true);

std::string format_metric(double value);

}  // namespace voxatlas
