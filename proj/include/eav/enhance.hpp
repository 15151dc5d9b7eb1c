#pragma once

#include <set>
#include <string>

#include "eav/attention.hpp"

namespace eav {

enum class Strategy {
    baseline,
    enhance_block,
    temp_attention_scaling,
    cfi_attention_scaling,
};

Strategy strategy_from_string(const std::string& name);
std::string strategy_name(Strategy s);

struct EnhanceConfig {
    Strategy strategy = Strategy::baseline;
    double tau = 1.0;
    bool clip_enabled = true;
    std::set<std::size_t> layer_mask;  // layers where enhancement applies

    bool layer_enabled(std::size_t layer) const {
        return layer_mask.contains(layer);
    }
};

/// Cross-frame intensity measurements for one layer evaluation.
struct CfiReport {
    double cfi = 0.0;           // scalar mean over groups and heads
    double cfi_enhanced = 1.0;  // after temperature scaling and clip
    Tensor per_group_cfi;       // (groups * heads) values
    std::size_t layer = 0;
    std::size_t step = 0;
};

/// Mean of the off-diagonal entries of each F x F map, averaged over all
/// groups and heads. F = 1 is defined as CFI = 0.
CfiReport cfi(const AttentionMap& map);

/// (tau + F) * cfi, clipped below at 1 when clipping is enabled.
double cfi_enhanced(double cfi_value, std::size_t frames, double tau,
                    bool clip_enabled);

/// Alternative aggregation order: scale and clip each group/head CFI first,
/// then average. Differs from the canonical scalar-first order only through
/// the clip nonlinearity; recorded in traces for comparison.
double cfi_enhanced_groupwise(const CfiReport& report, std::size_t frames,
                              double tau, bool clip_enabled);

/// Elementwise c * o_attn + h.
Tensor fuse_residual(const Tensor& o_attn, const Tensor& h, double c);

/// Inputs for one strategy application: frame-axis tokens (G, F, C), the
/// residual stream H of the same shape, and the block's projections.
struct AttentionContext {
    const Tensor& frame_tokens;
    const Tensor& residual;
    const AttentionParams& params;
};

struct StrategyResult {
    Tensor output;        // O_final
    Tensor o_attn;        // pre-fusion attention output actually fused
    CfiReport report;
    AttentionMap attention;  // the map the strategy actually used
};

/// Dispatches one temporal block through the selected enhancement strategy.
/// Layers outside the mask always take the baseline path.
StrategyResult apply_strategy(const EnhanceConfig& config, std::size_t layer,
                              const AttentionContext& ctx);

}  // namespace eav
