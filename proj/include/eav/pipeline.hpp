#pragma once

#include <cstdint>
#include <vector>

#include "eav/attention.hpp"
#include "eav/enhance.hpp"
#include "eav/trace.hpp"

namespace eav {

/// Per-step alpha_t values with cached cumulative products.
struct NoiseSchedule {
    std::vector<double> alphas;      // alpha_t for t = 1..T
    std::vector<double> alpha_bars;  // cumulative products

    std::size_t steps() const { return alphas.size(); }

    /// alpha_bar linearly spaced from `start` down to `end` over T steps;
    /// alphas derived as consecutive ratios.
    static NoiseSchedule linear_alpha_bar(std::size_t steps,
                                          double start = 1.0,
                                          double end = 0.01);
};

enum class BlockLayout { temporal, full_3d };

BlockLayout layout_from_string(const std::string& name);
std::string layout_name(BlockLayout layout);

/// One synthetic DiT block: attention projections plus a two-layer tanh
/// feed-forward, all a deterministic function of the construction seed.
struct DenoiserBlock {
    BlockLayout layout = BlockLayout::temporal;
    AttentionParams attention;
    Tensor ff_w1;  // (C, C)
    Tensor ff_w2;  // (C, C)
};

struct ToyDenoiser {
    std::vector<DenoiserBlock> layers;

    std::size_t depth() const { return layers.size(); }

    static ToyDenoiser seeded(std::uint64_t seed, std::size_t depth,
                              std::size_t d_model, std::size_t d_k,
                              std::size_t heads, BlockLayout layout);
};

struct RunSpec {
    std::uint64_t seed = 0;
    std::size_t batch = 1;
    std::size_t frames = 8;
    std::size_t channels = 16;
    std::size_t height = 4;
    std::size_t width = 4;
    std::size_t steps = 10;  // T
    std::size_t depth = 4;
    std::size_t d_k = 8;
    std::size_t heads = 2;
    double alpha_bar_start = 1.0;
    double alpha_bar_end = 0.01;
    BlockLayout layout = BlockLayout::temporal;
    EnhanceConfig enhance;
    bool record_full_maps = false;

    NoiseSchedule schedule() const {
        return NoiseSchedule::linear_alpha_bar(steps, alpha_bar_start,
                                               alpha_bar_end);
    }

    void validate() const;
};

/// Iterated application of the forward noising step from x_0 through step t,
/// drawing fresh Gaussian noise each step.
VideoLatent forward_diffuse(const VideoLatent& x0, const NoiseSchedule& schedule,
                            std::size_t t, Rng& rng);

/// Closed-form single jump: sqrt(alpha_bar_t) x_0 + sqrt(1 - alpha_bar_t) z.
VideoLatent forward_diffuse_jump(const VideoLatent& x0,
                                 const NoiseSchedule& schedule, std::size_t t,
                                 Rng& rng);

/// One deterministic denoising update x_{t-1} = x_t - eta * model(x_t) with
/// eta = 1/T, routing every block through its enhancement strategy and
/// appending one TraceRecord per block.
VideoLatent denoise_step(const VideoLatent& x_t, std::size_t t,
                         const ToyDenoiser& model, const EnhanceConfig& enhance,
                         std::size_t total_steps, TraceSink& trace,
                         bool record_full_maps = false);

struct RunResult {
    VideoLatent latent;
    std::vector<TraceRecord> trace;
};

/// Full reverse loop from a seeded Gaussian x_T. Deterministic given spec.
RunResult run(const RunSpec& spec);

}  // namespace eav
