#pragma once

#include <mutex>
#include <optional>
#include <vector>

#include "eav/tensor.hpp"

namespace eav {

/// Per-layer, per-step instrumentation emitted by the pipeline.
struct TraceRecord {
    std::size_t step = 0;
    std::size_t layer = 0;
    double cfi = 0.0;
    double cfi_enhanced = 1.0;           // scalar CFI scaled, canonical
    double cfi_enhanced_groupwise = 1.0; // per-map scaling averaged after clip
    double applied_scale = 1.0;  // c actually used in the residual fusion
    double norm_o_attn = 0.0;
    double norm_o_scaled = 0.0;  // l2 norm of the materialized c * O_attn
    double norm_h = 0.0;
    Tensor attention_snapshot;   // F x F mean over groups and heads
    std::optional<Tensor> full_map;  // (G, heads, F, F), behind a flag
    double wall_time_s = 0.0;    // in-memory only, never serialized
};

/// Append-only record collector. Appends are serialized; a sink belongs to
/// exactly one run.
class TraceSink {
public:
    void append(TraceRecord record) {
        std::lock_guard<std::mutex> lock(mutex_);
        records_.push_back(std::move(record));
    }

    const std::vector<TraceRecord>& records() const { return records_; }

private:
    std::mutex mutex_;
    std::vector<TraceRecord> records_;
};

}  // namespace eav
