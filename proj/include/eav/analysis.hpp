#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "eav/pipeline.hpp"
#include "eav/trace.hpp"

namespace eav {

/// Elementwise A_variant - A_baseline at matched (step, layer). Rows sum to
/// zero since both maps are row-stochastic.
struct DiffMap {
    std::size_t step = 0;
    std::size_t layer = 0;
    Tensor values;  // F x F
    double max_abs_diagonal = 0.0;
    double mean_off_diagonal = 0.0;
    double max_abs_entry = 0.0;
};

DiffMap diff_map(const TraceRecord& base, const TraceRecord& variant);

struct NormProportion {
    std::size_t step = 0;
    std::size_t layer = 0;
    double prop_baseline = 0.0;  // ||O_attn|| / ||H||
    double prop_enhanced = 0.0;  // ||c * O_attn|| / ||H||
};

struct NormProportionSeries {
    std::vector<NormProportion> samples;
    std::size_t undefined_count = 0;  // records excluded for ||H|| = 0
};

NormProportionSeries norm_proportions(const std::vector<TraceRecord>& trace);

struct CfiSample {
    std::size_t step = 0;
    double cfi = 0.0;
    double cfi_enhanced = 0.0;
};

/// Ordered (step, cfi, cfi_enhanced) series for one layer.
std::vector<CfiSample> cfi_trajectory(const std::vector<TraceRecord>& trace,
                                      std::size_t layer);

struct BenchReport {
    double median_baseline_s = 0.0;
    double median_enhanced_s = 0.0;
    double overhead_fraction = 0.0;  // (enhanced - baseline) / baseline
    std::size_t repetitions = 0;
};

/// Times identical specs differing only in strategy (baseline vs the spec's
/// strategy), reporting median wall times over the repetitions.
BenchReport overhead_bench(const RunSpec& spec, std::size_t repetitions);

// --- Serialization -------------------------------------------------------

/// Shortest decimal round-trip formatting (up to 17 significant digits).
std::string format_double(double v);

/// Line-delimited trace file: one CSV header, then one line per record with
/// fields step, layer, cfi, cfi_enhanced, applied_scale, norm_o_attn,
/// norm_o_scaled, norm_h, then the F*F snapshot row-major. Timings are not
/// serialized.
void write_trace(const std::filesystem::path& path,
                 const std::vector<TraceRecord>& trace);
std::vector<TraceRecord> read_trace(const std::filesystem::path& path);

/// CSV map export, row-major, header = frame indices.
void write_map_csv(const std::filesystem::path& path, const Tensor& map);
Tensor read_map_csv(const std::filesystem::path& path);

/// 8-bit portable graymap scaled to [min, max], with the scaling range in a
/// JSON sidecar next to the image.
void write_map_pgm(const std::filesystem::path& path, const Tensor& map);

/// Shape header line then one value per line; byte-stable for identical
/// tensors.
void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

/// Write-temp-then-rename text file write.
void atomic_write_text(const std::filesystem::path& path,
                       const std::string& content);

}  // namespace eav
