#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "vfl/errors.hpp"

namespace vfl {

/// Luma plane of one decoded frame. Chroma is parsed and discarded by the
/// readers; all analysis is luma-only. Samples are stored in 16-bit slots
/// regardless of bit depth.
struct FrameY {
    int width = 0;
    int height = 0;
    int bitdepth = 8;
    std::vector<std::uint16_t> luma;  // row-major, width*height samples
};

struct Segment {
    std::vector<FrameY> frames;
    double source_fps = 0.0;
    double duration_s = 0.0;
};

enum class ChromaLayout { C420, C422, C444, Mono };

struct VideoFormat {
    int width = 0;
    int height = 0;
    int bitdepth = 8;
    ChromaLayout chroma = ChromaLayout::C420;
    double fps = 0.0;
};

namespace detail {

inline std::size_t chroma_samples(const VideoFormat& f) {
    const std::size_t w = static_cast<std::size_t>(f.width);
    const std::size_t h = static_cast<std::size_t>(f.height);
    switch (f.chroma) {
        case ChromaLayout::C420: return 2 * (w / 2) * (h / 2);
        case ChromaLayout::C422: return 2 * (w / 2) * h;
        case ChromaLayout::C444: return 2 * w * h;
        case ChromaLayout::Mono: return 0;
    }
    return 0;
}

inline std::size_t bytes_per_sample(const VideoFormat& f) { return f.bitdepth > 8 ? 2 : 1; }

/// Reads one frame payload; returns false on clean EOF before the first byte.
inline bool read_frame_payload(std::istream& in, const VideoFormat& fmt, FrameY& out,
                               const std::string& ctx) {
    const std::size_t luma_n = static_cast<std::size_t>(fmt.width) * fmt.height;
    const std::size_t bps = bytes_per_sample(fmt);
    std::vector<char> buf(luma_n * bps);
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const std::size_t got = static_cast<std::size_t>(in.gcount());
    if (got == 0 && in.eof()) return false;
    if (got != buf.size()) throw FormatError(ctx + ": truncated frame");

    out.width = fmt.width;
    out.height = fmt.height;
    out.bitdepth = fmt.bitdepth;
    out.luma.resize(luma_n);
    const std::uint16_t max_sample = static_cast<std::uint16_t>((1u << fmt.bitdepth) - 1u);
    if (bps == 1) {
        for (std::size_t i = 0; i < luma_n; ++i)
            out.luma[i] = static_cast<std::uint8_t>(buf[i]);
    } else {
        // Little-endian 16-bit containers.
        for (std::size_t i = 0; i < luma_n; ++i) {
            const std::uint16_t lo = static_cast<std::uint8_t>(buf[2 * i]);
            const std::uint16_t hi = static_cast<std::uint8_t>(buf[2 * i + 1]);
            const std::uint16_t v = static_cast<std::uint16_t>(lo | (hi << 8));
            if (v > max_sample)
                throw FormatError(ctx + ": sample exceeds declared bit depth");
            out.luma[i] = v;
        }
    }
    const std::size_t skip = chroma_samples(fmt) * bps;
    if (skip > 0) {
        in.ignore(static_cast<std::streamsize>(skip));
        if (static_cast<std::size_t>(in.gcount()) != skip)
            throw FormatError(ctx + ": truncated frame");
    }
    return true;
}

}  // namespace detail

/// Pull-based Y4M (YUV4MPEG2) reader. Parses the stream header on
/// construction; next() yields luma planes in decode order.
class Y4mReader {
public:
    explicit Y4mReader(std::istream& in, std::string name = "y4m") : in_(in), name_(std::move(name)) {
        parse_header();
    }

    const VideoFormat& format() const { return fmt_; }
    double fps() const { return fmt_.fps; }

    std::optional<FrameY> next() {
        std::string marker;
        // FRAME marker line, optional parameters after a space.
        char c;
        while (in_.get(c)) {
            if (c == '\n') break;
            marker.push_back(c);
        }
        if (marker.empty() && in_.eof()) return std::nullopt;
        if (marker.rfind("FRAME", 0) != 0)
            throw FormatError(name_ + ": expected FRAME marker");
        FrameY f;
        if (!detail::read_frame_payload(in_, fmt_, f, name_))
            throw FormatError(name_ + ": truncated frame");
        return f;
    }

private:
    void parse_header() {
        std::string line;
        char c;
        while (in_.get(c)) {
            if (c == '\n') break;
            line.push_back(c);
            if (line.size() > 4096) throw FormatError(name_ + ": oversized stream header");
        }
        std::vector<std::string> tokens;
        std::size_t start = 0;
        while (start <= line.size()) {
            std::size_t pos = line.find(' ', start);
            if (pos == std::string::npos) pos = line.size();
            if (pos > start) tokens.push_back(line.substr(start, pos - start));
            start = pos + 1;
        }
        if (tokens.empty() || tokens[0] != "YUV4MPEG2")
            throw FormatError(name_ + ": missing YUV4MPEG2 signature");
        bool have_w = false, have_h = false, have_f = false;
        fmt_.chroma = ChromaLayout::C420;  // Y4M default
        for (std::size_t i = 1; i < tokens.size(); ++i) {
            const std::string& t = tokens[i];
            switch (t[0]) {
                case 'W':
                    fmt_.width = std::stoi(t.substr(1));
                    have_w = true;
                    break;
                case 'H':
                    fmt_.height = std::stoi(t.substr(1));
                    have_h = true;
                    break;
                case 'F': {
                    const std::size_t colon = t.find(':');
                    if (colon == std::string::npos)
                        throw FormatError(name_ + ": malformed F token '" + t + "'");
                    const double num = std::stod(t.substr(1, colon - 1));
                    const double den = std::stod(t.substr(colon + 1));
                    if (!(num > 0) || !(den > 0))
                        throw FormatError(name_ + ": malformed framerate");
                    fmt_.fps = num / den;
                    have_f = true;
                    break;
                }
                case 'C':
                    parse_chroma_tag(t.substr(1));
                    break;
                default:
                    break;  // I, A, X tokens are irrelevant to luma analysis
            }
        }
        if (!have_w || !have_h || !have_f)
            throw FormatError(name_ + ": header missing W/H/F tokens");
        if (fmt_.width <= 0 || fmt_.height <= 0)
            throw FormatError(name_ + ": non-positive frame dimensions");
        if (fmt_.chroma == ChromaLayout::C420 && (fmt_.width % 2 || fmt_.height % 2))
            throw FormatError(name_ + ": 4:2:0 requires even dimensions");
    }

    void parse_chroma_tag(const std::string& tag) {
        std::string base = tag;
        fmt_.bitdepth = 8;
        if (const auto p = tag.find("p10"); p != std::string::npos) {
            fmt_.bitdepth = 10;
            base = tag.substr(0, p);
        } else if (const auto p12 = tag.find("p12"); p12 != std::string::npos) {
            throw FormatError(name_ + ": unsupported bit depth in chroma tag '" + tag + "'");
        }
        if (base.rfind("420", 0) == 0)
            fmt_.chroma = ChromaLayout::C420;
        else if (base.rfind("422", 0) == 0)
            fmt_.chroma = ChromaLayout::C422;
        else if (base.rfind("444", 0) == 0)
            fmt_.chroma = ChromaLayout::C444;
        else if (base.rfind("mono", 0) == 0)
            fmt_.chroma = ChromaLayout::Mono;
        else
            throw FormatError(name_ + ": unsupported chroma tag '" + tag + "'");
    }

    std::istream& in_;
    std::string name_;
    VideoFormat fmt_;
};

/// Headerless planar YUV reader; the caller supplies the full format.
class RawYuvReader {
public:
    RawYuvReader(std::istream& in, VideoFormat fmt, std::string name = "yuv")
        : in_(in), fmt_(fmt), name_(std::move(name)) {
        if (fmt_.width <= 0 || fmt_.height <= 0) throw UsageError("raw YUV needs width/height");
        if (fmt_.bitdepth != 8 && fmt_.bitdepth != 10) throw UsageError("bitdepth must be 8 or 10");
        if (!(fmt_.fps > 0)) throw UsageError("raw YUV needs fps");
    }

    const VideoFormat& format() const { return fmt_; }
    double fps() const { return fmt_.fps; }

    std::optional<FrameY> next() {
        FrameY f;
        if (!detail::read_frame_payload(in_, fmt_, f, name_)) return std::nullopt;
        return f;
    }

private:
    std::istream& in_;
    VideoFormat fmt_;
    std::string name_;
};

/// Frames per segment of the given duration.
inline std::size_t frames_per_segment(double source_fps, double duration_s) {
    if (!(duration_s > 0)) throw UsageError("segment duration must be positive");
    const auto n = static_cast<long long>(std::llround(source_fps * duration_s));
    return n > 0 ? static_cast<std::size_t>(n) : 1;
}

/// Splits frames into consecutive non-overlapping segments; a final partial
/// segment is emitted if at least one frame remains.
inline std::vector<Segment> segment_stream(std::vector<FrameY> frames, double source_fps,
                                           double duration_s) {
    const std::size_t per = frames_per_segment(source_fps, duration_s);
    std::vector<Segment> out;
    std::size_t i = 0;
    while (i < frames.size()) {
        Segment s;
        s.source_fps = source_fps;
        s.duration_s = duration_s;
        const std::size_t end = std::min(frames.size(), i + per);
        s.frames.assign(std::make_move_iterator(frames.begin() + static_cast<std::ptrdiff_t>(i)),
                        std::make_move_iterator(frames.begin() + static_cast<std::ptrdiff_t>(end)));
        out.push_back(std::move(s));
        i = end;
    }
    return out;
}

/// Kept source indices under floor-advance decimation: frame 0 is kept, and
/// frame i is kept iff floor(i * target/source) advanced past frame i-1.
inline std::vector<std::size_t> downsample_indices(std::size_t n, double source_fps,
                                                   double target_fps) {
    std::vector<std::size_t> kept;
    double prev = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = std::floor(static_cast<double>(i) * target_fps / source_fps);
        if (i == 0 || v > prev) kept.push_back(i);
        prev = v;
    }
    return kept;
}

/// Uniform frame dropping to a lower framerate. Output frames are
/// bit-identical copies of kept input frames, order preserved.
inline Segment temporal_downsample(const Segment& s, double target_fps) {
    if (!(target_fps > 0)) throw UsageError("target framerate must be positive");
    if (target_fps > s.source_fps)
        throw UsageError("cannot downsample to a higher framerate");
    Segment out;
    out.source_fps = target_fps;
    out.duration_s = s.duration_s;
    for (const std::size_t i : downsample_indices(s.frames.size(), s.source_fps, target_fps))
        out.frames.push_back(s.frames[i]);
    return out;
}

/// Nearest-previous frame duplication to a higher framerate: output instant
/// k/target shows the latest source frame at or before that instant.
inline Segment temporal_upsample(const Segment& s, double target_fps) {
    if (!(target_fps > 0)) throw UsageError("target framerate must be positive");
    if (target_fps < s.source_fps)
        throw UsageError("cannot upsample to a lower framerate");
    const std::size_t n = s.frames.size();
    const auto m = static_cast<std::size_t>(
        std::llround(static_cast<double>(n) * target_fps / s.source_fps));
    Segment out;
    out.source_fps = target_fps;
    out.duration_s = s.duration_s;
    out.frames.reserve(m);
    for (std::size_t k = 0; k < m; ++k) {
        auto idx = static_cast<std::size_t>(
            std::floor(static_cast<double>(k) * s.source_fps / target_fps));
        if (idx >= n) idx = n - 1;
        out.frames.push_back(s.frames[idx]);
    }
    return out;
}

}  // namespace vfl
