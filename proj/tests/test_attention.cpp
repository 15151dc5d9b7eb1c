#include <cmath>

#include <doctest.h>

#include "eav/attention.hpp"

using namespace eav;

namespace {

// From-scratch attention for one group/head: explicit Q, K, logits, softmax.
Tensor attention_map_oracle(const Tensor& tokens, const AttentionParams& p,
                            std::size_t group, std::size_t head) {
    const std::size_t f = tokens.shape()[1];
    const std::size_t c = tokens.shape()[2];
    const std::size_t dk = p.d_k;
    const std::size_t row_w = p.heads * dk;
    const std::size_t off = head * dk;

    auto project = [&](const Tensor& w, std::size_t frame, std::size_t d) {
        double s = 0.0;
        for (std::size_t ch = 0; ch < c; ++ch) {
            s += tokens.at({group, frame, ch}) * w.at({ch, off + d});
        }
        return s;
    };
    (void)row_w;

    Tensor logits = Tensor::zeros({f, f});
    for (std::size_t i = 0; i < f; ++i) {
        for (std::size_t j = 0; j < f; ++j) {
            double dot = 0.0;
            for (std::size_t d = 0; d < dk; ++d) {
                dot += project(p.w_q, i, d) * project(p.w_k, j, d);
            }
            logits.at({i, j}) = dot / std::sqrt(static_cast<double>(dk));
        }
    }
    Tensor a = Tensor::zeros({f, f});
    for (std::size_t i = 0; i < f; ++i) {
        double mx = logits.at({i, 0});
        for (std::size_t j = 1; j < f; ++j) mx = std::max(mx, logits.at({i, j}));
        double sum = 0.0;
        for (std::size_t j = 0; j < f; ++j) {
            a.at({i, j}) = std::exp(logits.at({i, j}) - mx);
            sum += a.at({i, j});
        }
        for (std::size_t j = 0; j < f; ++j) a.at({i, j}) /= sum;
    }
    return a;
}

void check_row_stochastic(const AttentionMap& map) {
    const std::size_t f = map.frames();
    for (std::size_t g = 0; g < map.groups(); ++g) {
        for (std::size_t h = 0; h < map.heads(); ++h) {
            for (std::size_t i = 0; i < f; ++i) {
                double s = 0.0;
                for (std::size_t j = 0; j < f; ++j) {
                    const double v = map.weights.at({g, h, i, j});
                    CHECK(v >= 0.0);
                    CHECK(v <= 1.0);
                    s += v;
                }
                CHECK(std::abs(s - 1.0) < 1e-9);
            }
        }
    }
}

}  // namespace

TEST_CASE("to_frame_axis: H=W=1 is a pure relabel") {
    Rng rng(1);
    VideoLatent z = VideoLatent::wrap(gaussian(rng, {1, 2, 3, 1, 1}));
    Tensor t = to_frame_axis(z);
    REQUIRE(t.shape() == Shape{1, 2, 3});
    for (std::size_t f = 0; f < 2; ++f) {
        for (std::size_t c = 0; c < 3; ++c) {
            CHECK(t.at({0, f, c}) == z.data.at({0, f, c, 0, 0}));
        }
    }
}

TEST_CASE("to_frame_axis: group 3 holds pixel (h=1,w=1) across frames") {
    Rng rng(2);
    VideoLatent z = VideoLatent::wrap(gaussian(rng, {1, 2, 1, 2, 2}));
    Tensor t = to_frame_axis(z);
    REQUIRE(t.shape() == Shape{4, 2, 1});
    for (std::size_t f = 0; f < 2; ++f) {
        CHECK(t.at({3, f, 0}) == z.data.at({0, f, 0, 1, 1}));
    }
}

TEST_CASE("from_frame_axis inverts to_frame_axis bitwise") {
    Rng rng(3);
    VideoLatent z = VideoLatent::wrap(gaussian(rng, {2, 3, 4, 2, 3}));
    VideoLatent back = from_frame_axis(to_frame_axis(z), 2, 2, 3);
    REQUIRE(back.data.shape() == z.data.shape());
    for (std::size_t i = 0; i < z.data.size(); ++i) {
        CHECK(back.data[i] == z.data[i]);
    }
}

TEST_CASE("temporal_attention: F=1 gives A=[[1]] and projected V") {
    AttentionParams p = AttentionParams::seeded(10, 4, 2, 2);
    Rng rng(4);
    Tensor tokens = gaussian(rng, {3, 1, 4});
    AttentionResult res = temporal_attention(tokens, p);
    REQUIRE(res.map.weights.shape() == Shape{3, 2, 1, 1});
    for (double v : res.map.weights.data()) CHECK(v == 1.0);

    // O_attn must equal output-projected V when A = [[1]]
    Tensor v = matmul(tokens, p.w_v);
    Tensor expect = matmul(v, p.w_o);
    for (std::size_t i = 0; i < expect.size(); ++i) {
        CHECK(res.output[i] == doctest::Approx(expect[i]).epsilon(1e-12));
    }
}

TEST_CASE("temporal_attention: identical frames give uniform rows") {
    AttentionParams p = AttentionParams::seeded(11, 4, 2, 2);
    Rng rng(5);
    Tensor frame = gaussian(rng, {1, 1, 4});
    const std::size_t f = 5;
    Tensor tokens = Tensor::zeros({1, f, 4});
    for (std::size_t i = 0; i < f; ++i) {
        for (std::size_t c = 0; c < 4; ++c) {
            tokens.at({0, i, c}) = frame.at({0, 0, c});
        }
    }
    AttentionResult res = temporal_attention(tokens, p);
    for (double v : res.map.weights.data()) {
        CHECK(v == doctest::Approx(1.0 / f).epsilon(1e-12));
    }
}

TEST_CASE("temporal_attention: F=3 seeded weights match loop-level oracle") {
    AttentionParams p = AttentionParams::seeded(12, 6, 3, 2);
    Rng rng(6);
    Tensor tokens = gaussian(rng, {2, 3, 6});
    AttentionResult res = temporal_attention(tokens, p);
    for (std::size_t g = 0; g < 2; ++g) {
        for (std::size_t h = 0; h < 2; ++h) {
            Tensor want = attention_map_oracle(tokens, p, g, h);
            for (std::size_t i = 0; i < 3; ++i) {
                for (std::size_t j = 0; j < 3; ++j) {
                    CHECK(std::abs(res.map.weights.at({g, h, i, j}) -
                                   want.at({i, j})) < 1e-10);
                }
            }
        }
    }
}

TEST_CASE("temporal_attention: scale_override sqrt(d_k) is bit-identical") {
    AttentionParams p = AttentionParams::seeded(13, 4, 4, 1);
    Rng rng(7);
    Tensor tokens = gaussian(rng, {2, 4, 4});
    AttentionResult a = temporal_attention(tokens, p);
    AttentionResult b = temporal_attention(tokens, p, std::sqrt(4.0));
    for (std::size_t i = 0; i < a.map.weights.size(); ++i) {
        CHECK(a.map.weights[i] == b.map.weights[i]);
    }
    for (std::size_t i = 0; i < a.output.size(); ++i) {
        CHECK(a.output[i] == b.output[i]);
    }
}

TEST_CASE("temporal_attention: row stochasticity, including sharp logits") {
    AttentionParams p = AttentionParams::seeded(14, 4, 2, 2);
    Rng rng(8);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor tokens = gaussian(rng, {2, 4, 4});
        const double mag = std::pow(10.0, 3.0 * rng.next_uniform());
        for (double& v : tokens.data()) v *= mag;
        check_row_stochastic(temporal_attention(tokens, p).map);
    }
}

TEST_CASE("spatial permutation permutes groups, leaves per-group maps alone") {
    AttentionParams p = AttentionParams::seeded(15, 4, 2, 1);
    Rng rng(9);
    VideoLatent z = VideoLatent::wrap(gaussian(rng, {1, 3, 4, 1, 2}));
    Tensor t = to_frame_axis(z);  // groups: (h=0? n/a) w=0 -> 0, w=1 -> 1

    // swap the two spatial columns
    Tensor swapped = z.data;
    for (std::size_t f = 0; f < 3; ++f) {
        for (std::size_t c = 0; c < 4; ++c) {
            std::swap(swapped.at({0, f, c, 0, 0}), swapped.at({0, f, c, 0, 1}));
        }
    }
    Tensor t2 = to_frame_axis(VideoLatent::wrap(swapped));

    AttentionMap m1 = temporal_attention(t, p).map;
    AttentionMap m2 = temporal_attention(t2, p).map;
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(m1.weights.at({0, 0, i, j}) == m2.weights.at({1, 0, i, j}));
            CHECK(m1.weights.at({1, 0, i, j}) == m2.weights.at({0, 0, i, j}));
        }
    }
}

TEST_CASE("temporal_subview_3d: F=1 gives [[1]] maps") {
    AttentionParams p = AttentionParams::seeded(16, 4, 2, 1);
    Rng rng(10);
    Tensor tokens = gaussian(rng, {1, 4, 4});  // F=1, H=2, W=2
    AttentionMap m = temporal_subview_3d(tokens, p, 1, 2, 2);
    REQUIRE(m.weights.shape() == Shape{4, 1, 1, 1});
    for (double v : m.weights.data()) CHECK(v == 1.0);
}

TEST_CASE("temporal_subview_3d: B=1, H=W=1 matches temporal_attention") {
    AttentionParams p = AttentionParams::seeded(17, 4, 2, 2);
    Rng rng(11);
    Tensor tokens = gaussian(rng, {1, 3, 4});
    AttentionMap sub = temporal_subview_3d(tokens, p, 3, 1, 1);
    AttentionMap direct = temporal_attention(tokens, p).map;
    REQUIRE(sub.weights.shape() == direct.weights.shape());
    for (std::size_t i = 0; i < sub.weights.size(); ++i) {
        CHECK(sub.weights[i] == direct.weights[i]);
    }
}

TEST_CASE("temporal_subview_3d: explicit per-site slicing oracle") {
    const std::size_t f = 2, h = 2, w = 2, c = 4;
    AttentionParams p = AttentionParams::seeded(18, c, 2, 1);
    Rng rng(12);
    Tensor tokens = gaussian(rng, {1, f * h * w, c});
    AttentionMap m = temporal_subview_3d(tokens, p, f, h, w);
    REQUIRE(m.weights.shape() == Shape{h * w, 1, f, f});

    // slice tokens per spatial site explicitly and run plain attention
    for (std::size_t hh = 0; hh < h; ++hh) {
        for (std::size_t ww = 0; ww < w; ++ww) {
            Tensor site = Tensor::zeros({1, f, c});
            for (std::size_t ff = 0; ff < f; ++ff) {
                const std::size_t tok = ff * h * w + hh * w + ww;
                for (std::size_t ch = 0; ch < c; ++ch) {
                    site.at({0, ff, ch}) = tokens.at({0, tok, ch});
                }
            }
            AttentionMap want = temporal_attention(site, p).map;
            const std::size_t group = hh * w + ww;
            for (std::size_t i = 0; i < f; ++i) {
                for (std::size_t j = 0; j < f; ++j) {
                    CHECK(std::abs(m.weights.at({group, 0, i, j}) -
                                   want.weights.at({0, 0, i, j})) < 1e-12);
                }
            }
        }
    }
}

TEST_CASE("temporal_subview_3d: bad factorization rejected") {
    AttentionParams p = AttentionParams::seeded(19, 4, 2, 1);
    Tensor tokens = Tensor::zeros({1, 7, 4});
    CHECK_THROWS_AS(temporal_subview_3d(tokens, p, 2, 2, 2), DimensionError);
}
