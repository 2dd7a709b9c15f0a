#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "vfl/domain.hpp"
#include "vfl/errors.hpp"
#include "vfl/parallel.hpp"
#include "vfl/video_io.hpp"

namespace vfl {

/// Block size of the texture-energy transform. Edge blocks are zero-padded
/// (after level centering) so the block count per frame is constant.
inline constexpr int kEnergyBlockSize = 32;

/// Per-frame complexity values. `gradient` compares against the previous
/// frame's per-block energies and is 0 for the first frame of a segment.
struct FrameFeatures {
    double energy = 0.0;
    double gradient = 0.0;
    double luminance = 0.0;
};

namespace dct {

/// Orthonormal DCT-II basis for kEnergyBlockSize, row u = basis for output
/// frequency u: C[u][x] = a(u) cos(pi (2x+1) u / (2w)).
inline const std::vector<double>& basis() {
    static const std::vector<double> table = [] {
        const int w = kEnergyBlockSize;
        std::vector<double> t(static_cast<std::size_t>(w) * w);
        const double pi = 3.14159265358979323846264338327950288;
        for (int u = 0; u < w; ++u) {
            const double a = u == 0 ? std::sqrt(1.0 / w) : std::sqrt(2.0 / w);
            for (int x = 0; x < w; ++x)
                t[static_cast<std::size_t>(u) * w + x] =
                    a * std::cos(pi * (2.0 * x + 1.0) * u / (2.0 * w));
        }
        return t;
    }();
    return table;
}

/// Frequency weights e^| (u/w)^2 + (v/w)^2 - 1 |; the DC slot is unused.
inline const std::vector<double>& weights() {
    static const std::vector<double> table = [] {
        const int w = kEnergyBlockSize;
        std::vector<double> t(static_cast<std::size_t>(w) * w);
        for (int u = 0; u < w; ++u)
            for (int v = 0; v < w; ++v) {
                const double fu = static_cast<double>(u) / w;
                const double fv = static_cast<double>(v) / w;
                t[static_cast<std::size_t>(u) * w + v] = std::exp(std::abs(fu * fu + fv * fv - 1.0));
            }
        return t;
    }();
    return table;
}

}  // namespace dct

/// Weighted AC energy of one level-centered block: the 2D orthonormal
/// DCT-II is applied separably and every coefficient except DC contributes
/// weight(u,v) * |coefficient|.
inline double block_texture_energy(const double* block /* w*w, row-major */) {
    const int w = kEnergyBlockSize;
    const auto& c = dct::basis();
    const auto& wt = dct::weights();
    // tmp = C * block  (transform columns of each row bundle)
    double tmp[kEnergyBlockSize * kEnergyBlockSize];
    for (int u = 0; u < w; ++u) {
        for (int y = 0; y < w; ++y) {
            double acc = 0.0;
            const double* crow = &c[static_cast<std::size_t>(u) * w];
            for (int x = 0; x < w; ++x) acc += crow[x] * block[x * w + y];
            tmp[u * w + y] = acc;
        }
    }
    // out(u,v) = sum_y tmp(u,y) * C(v,y); accumulate weighted magnitudes.
    double energy = 0.0;
    for (int u = 0; u < w; ++u) {
        for (int v = 0; v < w; ++v) {
            if (u == 0 && v == 0) continue;
            double acc = 0.0;
            const double* trow = &tmp[u * w];
            const double* crow = &c[static_cast<std::size_t>(v) * w];
            for (int y = 0; y < w; ++y) acc += trow[y] * crow[y];
            energy += wt[static_cast<std::size_t>(u) * w + v] * std::abs(acc);
        }
    }
    return energy;
}

inline std::size_t blocks_per_row(int width) {
    return (static_cast<std::size_t>(width) + kEnergyBlockSize - 1) / kEnergyBlockSize;
}
inline std::size_t blocks_per_col(int height) {
    return (static_cast<std::size_t>(height) + kEnergyBlockSize - 1) / kEnergyBlockSize;
}

/// Per-frame intermediate: one energy per 32x32 block plus the mean luma.
struct FrameEnergies {
    std::vector<double> block_energy;  // row-major block order
    double mean_luma = 0.0;
    std::size_t blocks_x = 0;
    std::size_t blocks_y = 0;
};

/// Computes all block energies of a frame. Samples are centered on the mid
/// level of the declared bit depth so flat frames carry exactly zero AC
/// energy; edge blocks are zero-padded after centering.
inline FrameEnergies frame_energies(const FrameY& frame) {
    const int w = kEnergyBlockSize;
    FrameEnergies out;
    out.blocks_x = blocks_per_row(frame.width);
    out.blocks_y = blocks_per_col(frame.height);
    out.block_energy.resize(out.blocks_x * out.blocks_y);
    const double center = static_cast<double>(1u << (frame.bitdepth - 1));

    double luma_sum = 0.0;
    for (const auto s : frame.luma) luma_sum += s;
    out.mean_luma = frame.luma.empty() ? 0.0 : luma_sum / static_cast<double>(frame.luma.size());

    double block[kEnergyBlockSize * kEnergyBlockSize];
    for (std::size_t by = 0; by < out.blocks_y; ++by) {
        for (std::size_t bx = 0; bx < out.blocks_x; ++bx) {
            for (int yy = 0; yy < w; ++yy) {
                const std::size_t y = by * w + static_cast<std::size_t>(yy);
                for (int xx = 0; xx < w; ++xx) {
                    const std::size_t x = bx * w + static_cast<std::size_t>(xx);
                    block[yy * w + xx] =
                        (y < static_cast<std::size_t>(frame.height) &&
                         x < static_cast<std::size_t>(frame.width))
                            ? static_cast<double>(frame.luma[y * frame.width + x]) - center
                            : 0.0;
                }
            }
            out.block_energy[by * out.blocks_x + bx] = block_texture_energy(block);
        }
    }
    return out;
}

/// Frame features from precomputed energies; `prev` may be null (first frame).
inline FrameFeatures frame_features(const FrameEnergies& cur, const FrameEnergies* prev) {
    if (prev && prev->block_energy.size() != cur.block_energy.size())
        throw UsageError("frame dimensions differ from previous frame");
    FrameFeatures f;
    const auto n = static_cast<double>(cur.block_energy.size());
    double esum = 0.0;
    for (const double e : cur.block_energy) esum += e;
    f.energy = esum / n;
    if (prev) {
        double gsum = 0.0;
        for (std::size_t i = 0; i < cur.block_energy.size(); ++i)
            gsum += std::abs(cur.block_energy[i] - prev->block_energy[i]);
        f.gradient = gsum / n;
    }
    f.luminance = cur.mean_luma;
    return f;
}

inline FrameFeatures frame_features(const FrameY& frame, const FrameY* prev_frame) {
    if (prev_frame && (prev_frame->width != frame.width || prev_frame->height != frame.height))
        throw UsageError("frame dimensions differ from previous frame");
    const FrameEnergies cur = frame_energies(frame);
    if (!prev_frame) return frame_features(cur, nullptr);
    const FrameEnergies prev = frame_energies(*prev_frame);
    return frame_features(cur, &prev);
}

/// Streaming per-segment aggregator: feed per-frame energies in display
/// order, read the averaged triple at the segment boundary. The gradient of
/// the first frame is undefined and excluded from the mean.
class SegmentFeatureAccumulator {
public:
    void add(const FrameEnergies& e) {
        const FrameFeatures f = frame_features(e, frames_ ? &prev_ : nullptr);
        energy_sum_ += f.energy;
        luma_sum_ += f.luminance;
        if (frames_ > 0) gradient_sum_ += f.gradient;
        prev_ = e;
        ++frames_;
    }

    std::size_t frames() const { return frames_; }

    SegmentFeatures features() const {
        if (frames_ == 0) throw UsageError("empty segment");
        SegmentFeatures s;
        s.energy = energy_sum_ / static_cast<double>(frames_);
        s.gradient = frames_ > 1 ? gradient_sum_ / static_cast<double>(frames_ - 1) : 0.0;
        s.luminance = luma_sum_ / static_cast<double>(frames_);
        return s;
    }

    void reset() { *this = SegmentFeatureAccumulator{}; }

private:
    FrameEnergies prev_;
    std::size_t frames_ = 0;
    double energy_sum_ = 0.0;
    double gradient_sum_ = 0.0;
    double luma_sum_ = 0.0;
};

/// Segment complexity triple. Block energies are computed per frame (in
/// parallel when threads > 1) and reduced sequentially in frame order, so
/// the result is independent of the thread count.
inline SegmentFeatures segment_features(const Segment& segment, unsigned threads = 1) {
    if (segment.frames.empty()) throw UsageError("empty segment");
    std::vector<FrameEnergies> energies(segment.frames.size());
    parallel_for(segment.frames.size(), threads,
                 [&](std::size_t i) { energies[i] = frame_energies(segment.frames[i]); });
    SegmentFeatureAccumulator acc;
    for (const auto& e : energies) acc.add(e);
    return acc.features();
}

}  // namespace vfl
