#include "eav/analysis.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace eav {

DiffMap diff_map(const TraceRecord& base, const TraceRecord& variant) {
    if (base.step != variant.step || base.layer != variant.layer) {
        throw PairingError("diff_map: records at (step " +
                           std::to_string(base.step) + ", layer " +
                           std::to_string(base.layer) + ") vs (step " +
                           std::to_string(variant.step) + ", layer " +
                           std::to_string(variant.layer) + ")");
    }
    if (base.attention_snapshot.size() == 0 ||
        variant.attention_snapshot.size() == 0) {
        throw PairingError("diff_map: both records need attention snapshots");
    }
    if (base.attention_snapshot.shape() != variant.attention_snapshot.shape()) {
        throw PairingError("diff_map: snapshot shapes differ, " +
                           base.attention_snapshot.shape().str() + " vs " +
                           variant.attention_snapshot.shape().str());
    }

    DiffMap d;
    d.step = base.step;
    d.layer = base.layer;
    d.values = sub(variant.attention_snapshot, base.attention_snapshot);

    const std::size_t f = d.values.shape()[0];
    double off_sum = 0.0;
    for (std::size_t i = 0; i < f; ++i) {
        for (std::size_t j = 0; j < f; ++j) {
            const double v = d.values.at({i, j});
            d.max_abs_entry = std::max(d.max_abs_entry, std::abs(v));
            if (i == j) {
                d.max_abs_diagonal = std::max(d.max_abs_diagonal, std::abs(v));
            } else {
                off_sum += v;
            }
        }
    }
    d.mean_off_diagonal =
        f > 1 ? off_sum / static_cast<double>(f * (f - 1)) : 0.0;
    return d;
}

NormProportionSeries norm_proportions(const std::vector<TraceRecord>& trace) {
    NormProportionSeries series;
    for (const TraceRecord& r : trace) {
        if (r.norm_h == 0.0) {
            ++series.undefined_count;
            continue;
        }
        NormProportion p;
        p.step = r.step;
        p.layer = r.layer;
        p.prop_baseline = r.norm_o_attn / r.norm_h;
        p.prop_enhanced = r.norm_o_scaled / r.norm_h;
        series.samples.push_back(p);
    }
    return series;
}

std::vector<CfiSample> cfi_trajectory(const std::vector<TraceRecord>& trace,
                                      std::size_t layer) {
    std::vector<CfiSample> out;
    for (const TraceRecord& r : trace) {
        if (r.layer != layer) continue;
        out.push_back(CfiSample{r.step, r.cfi, r.cfi_enhanced});
    }
    if (out.empty()) {
        throw ParameterError("cfi_trajectory: no records for layer " +
                             std::to_string(layer));
    }
    // Reverse loop emits decreasing t; present the series in step order.
    std::sort(out.begin(), out.end(),
              [](const CfiSample& a, const CfiSample& b) { return a.step < b.step; });
    return out;
}

namespace {

double median(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

double timed_run(const RunSpec& spec) {
    const auto t0 = std::chrono::steady_clock::now();
    RunResult result = run(spec);
    const auto t1 = std::chrono::steady_clock::now();
    (void)result;
    return std::chrono::duration<double>(t1 - t0).count();
}

}  // namespace

BenchReport overhead_bench(const RunSpec& spec, std::size_t repetitions) {
    if (repetitions < 3) {
        throw ParameterError("overhead_bench: repetitions must be >= 3");
    }
    RunSpec base = spec;
    base.enhance.strategy = Strategy::baseline;
    RunSpec enhanced = spec;

    std::vector<double> base_times, enhanced_times;
    base_times.reserve(repetitions);
    enhanced_times.reserve(repetitions);
    // Warm-up pass keeps first-touch costs out of both arms.
    timed_run(base);
    for (std::size_t i = 0; i < repetitions; ++i) {
        base_times.push_back(timed_run(base));
        enhanced_times.push_back(timed_run(enhanced));
    }

    BenchReport report;
    report.repetitions = repetitions;
    report.median_baseline_s = median(base_times);
    report.median_enhanced_s = median(enhanced_times);
    report.overhead_fraction =
        (report.median_enhanced_s - report.median_baseline_s) /
        report.median_baseline_s;
    return report;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void atomic_write_text(const std::filesystem::path& path,
                       const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string());
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

void write_trace(const std::filesystem::path& path,
                 const std::vector<TraceRecord>& trace) {
    std::ostringstream os;
    const std::size_t f =
        trace.empty() ? 0 : trace.front().attention_snapshot.shape()[0];
    os << "step,layer,cfi,cfi_enhanced,cfi_enhanced_groupwise,applied_scale,"
          "norm_o_attn,norm_o_scaled,norm_h";
    for (std::size_t i = 0; i < f; ++i) {
        for (std::size_t j = 0; j < f; ++j) {
            os << ",a" << i << "_" << j;
        }
    }
    os << "\n";
    for (const TraceRecord& r : trace) {
        os << r.step << ',' << r.layer << ',' << format_double(r.cfi) << ','
           << format_double(r.cfi_enhanced) << ','
           << format_double(r.cfi_enhanced_groupwise) << ','
           << format_double(r.applied_scale) << ','
           << format_double(r.norm_o_attn) << ','
           << format_double(r.norm_o_scaled) << ','
           << format_double(r.norm_h);
        for (double v : r.attention_snapshot.data()) {
            os << ',' << format_double(v);
        }
        os << "\n";
    }
    atomic_write_text(path, os.str());
}

std::vector<TraceRecord> read_trace(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error("empty trace file " + path.string());
    }
    std::vector<TraceRecord> records;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ls, field, ',')) fields.push_back(field);
        if (fields.size() < 9) {
            throw std::runtime_error("malformed trace line: " + line);
        }
        TraceRecord r;
        r.step = std::stoul(fields[0]);
        r.layer = std::stoul(fields[1]);
        r.cfi = std::stod(fields[2]);
        r.cfi_enhanced = std::stod(fields[3]);
        r.cfi_enhanced_groupwise = std::stod(fields[4]);
        r.applied_scale = std::stod(fields[5]);
        r.norm_o_attn = std::stod(fields[6]);
        r.norm_o_scaled = std::stod(fields[7]);
        r.norm_h = std::stod(fields[8]);
        const std::size_t n = fields.size() - 9;
        const std::size_t f = static_cast<std::size_t>(std::llround(std::sqrt(
            static_cast<double>(n))));
        if (f * f != n) {
            throw std::runtime_error("trace snapshot is not square: " + line);
        }
        std::vector<double> snap(n);
        for (std::size_t i = 0; i < n; ++i) snap[i] = std::stod(fields[9 + i]);
        r.attention_snapshot = Tensor(Shape{f, f}, std::move(snap));
        records.push_back(std::move(r));
    }
    return records;
}

void write_map_csv(const std::filesystem::path& path, const Tensor& map) {
    if (map.shape().rank() != 2) {
        throw DimensionError("write_map_csv: expected rank-2 map, got " +
                             map.shape().str());
    }
    const std::size_t rows = map.shape()[0];
    const std::size_t cols = map.shape()[1];
    std::ostringstream os;
    for (std::size_t j = 0; j < cols; ++j) {
        if (j) os << ',';
        os << "f" << j;
    }
    os << "\n";
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            if (j) os << ',';
            os << format_double(map.at({i, j}));
        }
        os << "\n";
    }
    atomic_write_text(path, os.str());
}

Tensor read_map_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error("empty map file " + path.string());
    }
    std::vector<double> values;
    std::size_t rows = 0, cols = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string field;
        std::size_t c = 0;
        while (std::getline(ls, field, ',')) {
            values.push_back(std::stod(field));
            ++c;
        }
        if (rows == 0) cols = c;
        else if (c != cols) throw std::runtime_error("ragged map file");
        ++rows;
    }
    return Tensor(Shape{rows, cols}, std::move(values));
}

void write_map_pgm(const std::filesystem::path& path, const Tensor& map) {
    if (map.shape().rank() != 2) {
        throw DimensionError("write_map_pgm: expected rank-2 map, got " +
                             map.shape().str());
    }
    const std::size_t rows = map.shape()[0];
    const std::size_t cols = map.shape()[1];
    double lo = map[0], hi = map[0];
    for (double v : map.data()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double span = hi > lo ? hi - lo : 1.0;

    std::ostringstream os;
    os << "P2\n" << cols << " " << rows << "\n255\n";
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            const int g = static_cast<int>(
                std::lround(255.0 * (map.at({i, j}) - lo) / span));
            if (j) os << ' ';
            os << g;
        }
        os << "\n";
    }
    atomic_write_text(path, os.str());

    std::ostringstream meta;
    meta << "{\n  \"min\": " << format_double(lo)
         << ",\n  \"max\": " << format_double(hi) << "\n}\n";
    atomic_write_text(path.string() + ".meta.json", meta.str());
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
    std::ostringstream os;
    os << "shape";
    for (std::size_t d : t.shape().dims()) os << ' ' << d;
    os << "\n";
    for (double v : t.data()) os << format_double(v) << "\n";
    atomic_write_text(path, os.str());
}

Tensor read_tensor(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string tag;
    in >> tag;
    if (tag != "shape") {
        throw std::runtime_error("bad tensor file header in " + path.string());
    }
    std::string rest;
    std::getline(in, rest);
    std::istringstream hs(rest);
    std::vector<std::size_t> dims;
    std::size_t d;
    while (hs >> d) dims.push_back(d);
    Shape shape(dims);
    std::vector<double> values;
    values.reserve(shape.count());
    double v;
    while (in >> v) values.push_back(v);
    return Tensor(shape, std::move(values));
}

}  // namespace eav
