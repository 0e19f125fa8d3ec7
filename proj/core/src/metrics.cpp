#include "voxatlas/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "voxatlas/distance_transform.hpp"
#include "voxatlas/error.hpp"

namespace voxatlas {

namespace {

void require_same_grid(const LabelVolume& pred, const LabelVolume& gt) {
    if (!pred.geometry().same_grid(gt.geometry()))
        fail(errc::alignment, "metrics: prediction and ground truth are on different grids");
}

std::vector<std::uint8_t> class_mask(const LabelVolume& labels, int tissue_class) {
    std::vector<std::uint8_t> m(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) m[i] = labels[i] == tissue_class ? 1 : 0;
    return m;
}

// 6-neighborhood boundary: set voxels with a face neighbor outside the set
// (the volume edge counts as outside).
std::vector<std::uint8_t> surface_of(const Geometry& g, const std::vector<std::uint8_t>& set) {
    const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
    std::vector<std::uint8_t> surf(set.size(), 0);
    std::size_t idx = 0;
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i, ++idx) {
                if (!set[idx]) continue;
                const bool boundary =
                    i == 0 || i == nx - 1 || j == 0 || j == ny - 1 || k == 0 || k == nz - 1 ||
                    !set[idx - 1] || !set[idx + 1] || !set[idx - nx] || !set[idx + nx] ||
                    !set[idx - static_cast<std::size_t>(nx) * ny] || !set[idx + static_cast<std::size_t>(nx) * ny];
                if (boundary) surf[idx] = 1;
            }
    return surf;
}

double directed_max(const std::vector<std::uint8_t>& from, const std::vector<double>& sq_dist_to_other) {
    double worst = 0.0;
    for (std::size_t i = 0; i < from.size(); ++i)
        if (from[i] && sq_dist_to_other[i] > worst) worst = sq_dist_to_other[i];
    return worst;
}

}  // namespace

double dice(const LabelVolume& pred, const LabelVolume& gt, int tissue_class) {
    require_same_grid(pred, gt);
    std::size_t a = 0, b = 0, both = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool in_a = pred[i] == tissue_class;
        const bool in_b = gt[i] == tissue_class;
        a += in_a;
        b += in_b;
        both += in_a && in_b;
    }
    if (a == 0 && b == 0) return 1.0;
    if (a == 0 || b == 0) return 0.0;
    return 2.0 * static_cast<double>(both) / static_cast<double>(a + b);
}

double hausdorff(const LabelVolume& pred, const LabelVolume& gt, int tissue_class, HausdorffVariant variant) {
    require_same_grid(pred, gt);
    const Geometry& g = pred.geometry();

    std::vector<std::uint8_t> a = class_mask(pred, tissue_class);
    std::vector<std::uint8_t> b = class_mask(gt, tissue_class);
    bool a_any = false, b_any = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        a_any = a_any || a[i];
        b_any = b_any || b[i];
    }
    if (!a_any || !b_any)
        fail(errc::undefined_metric, "hausdorff: class " + std::to_string(tissue_class) +
                                         " is empty in " + (!a_any ? "prediction" : "ground truth"));

    if (variant == HausdorffVariant::surface) {
        a = surface_of(g, a);
        b = surface_of(g, b);
    }

    const std::vector<double> dist_to_b = squared_distance_transform(g, b);
    const std::vector<double> dist_to_a = squared_distance_transform(g, a);
    const double worst = std::max(directed_max(a, dist_to_b), directed_max(b, dist_to_a));
    return std::sqrt(worst);
}

double avd(const LabelVolume& pred, const LabelVolume& gt, int tissue_class) {
    require_same_grid(pred, gt);
    std::size_t a = 0, b = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        a += pred[i] == tissue_class;
        b += gt[i] == tissue_class;
    }
    if (b == 0) fail(errc::undefined_metric, "avd: ground-truth class " + std::to_string(tissue_class) + " is empty");
    const auto& s = gt.geometry().spacing;
    const double voxel_volume = s[0] * s[1] * s[2];
    const double vp = static_cast<double>(a) * voxel_volume;
    const double vgt = static_cast<double>(b) * voxel_volume;
    return std::abs(vp - vgt) / vgt * 100.0;
}

MetricsReport evaluate(const LabelVolume& pred, const LabelVolume& gt, HausdorffVariant variant) {
    require_same_grid(pred, gt);
    MetricsReport report;
    for (int c = 0; c < 3; ++c) {
        const int tissue_class = c + 1;  // CSF=1, GM=2, WM=3
        ClassRow& row = report.tissue[c];
        row.dsc = dice(pred, gt, tissue_class);
        try {
            row.hd_mm = hausdorff(pred, gt, tissue_class, variant);
        } catch (const Error& e) {
            if (e.code() != errc::undefined_metric) throw;
        }
        try {
            row.avd_pct = avd(pred, gt, tissue_class);
        } catch (const Error& e) {
            if (e.code() != errc::undefined_metric) throw;
        }
    }

    auto mean_of = [&](auto getter) -> std::optional<double> {
        double sum = 0.0;
        for (int c = 0; c < 3; ++c) {
            const auto& v = getter(report.tissue[c]);
            if (!v) return std::nullopt;
            sum += *v;
        }
        return sum / 3.0;
    };
    report.mean.dsc = mean_of([](const ClassRow& r) -> const std::optional<double>& { return r.dsc; });
    report.mean.hd_mm = mean_of([](const ClassRow& r) -> const std::optional<double>& { return r.hd_mm; });
    report.mean.avd_pct = mean_of([](const ClassRow& r) -> const std::optional<double>& { return r.avd_pct; });
    return report;
}

CohortSummary summarize(std::span<const MetricsReport> cases) {
    CohortSummary summary;
    for (int metric = 0; metric < 3; ++metric) {
        for (int cls = 0; cls < 4; ++cls) {
            double sum = 0.0, sum2 = 0.0;
            std::size_t n = 0;
            for (const MetricsReport& r : cases) {
                const ClassRow& row = cls < 3 ? r.tissue[cls] : r.mean;
                const std::optional<double>& cell =
                    metric == 0 ? row.dsc : (metric == 1 ? row.hd_mm : row.avd_pct);
                if (!cell) continue;
                sum += *cell;
                sum2 += *cell * *cell;
                ++n;
            }
            if (n == 0) continue;
            CohortStats stats;
            stats.count = n;
            stats.mean = sum / static_cast<double>(n);
            stats.stddev = std::sqrt(std::max(0.0, sum2 / static_cast<double>(n) - stats.mean * stats.mean));
            summary.cells[metric][cls] = stats;
        }
    }
    return summary;
}

std::string format_metric(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", value);
    return buf;
}

namespace {

std::string cell_str(const std::optional<double>& v) { return v ? format_metric(*v) : std::string(); }

}  // namespace

void write_metrics_csv(const std::filesystem::path& path, std::span<const std::string> case_ids,
                       std::span<const MetricsReport> cases, bool with_summary) {
    if (case_ids.size() != cases.size()) fail(errc::settings, "metrics csv: id/report count mismatch");
    std::ofstream out(path);
    if (!out) fail(errc::io, "cannot open " + path.string() + " for writing");

    static const char* kClassNames[4] = {"csf", "gm", "wm", "mean"};
    out << "case,class,dsc,hd_mm,avd_pct\n";
    for (std::size_t i = 0; i < cases.size(); ++i) {
        for (int cls = 0; cls < 4; ++cls) {
            const ClassRow& row = cls < 3 ? cases[i].tissue[cls] : cases[i].mean;
            out << case_ids[i] << ',' << kClassNames[cls] << ',' << cell_str(row.dsc) << ','
                << cell_str(row.hd_mm) << ',' << cell_str(row.avd_pct) << '\n';
        }
    }
    if (with_summary) {
        const CohortSummary summary = summarize(cases);
        for (const char* kind : {"summary_mean", "summary_std"}) {
            const bool is_mean = kind[8] == 'm';
            for (int cls = 0; cls < 4; ++cls) {
                out << kind << ',' << kClassNames[cls];
                for (int metric = 0; metric < 3; ++metric) {
                    const auto& cell = summary.cells[metric][cls];
                    out << ',' << (cell ? format_metric(is_mean ? cell->mean : cell->stddev) : std::string());
                }
                out << '\n';
            }
        }
    }
    if (!out) fail(errc::io, "failed writing " + path.string());
}

}  // namespace voxatlas
