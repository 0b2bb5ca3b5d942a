#include "midgap/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

namespace fs = std::filesystem;

namespace midgap {

FrameSequence FrameSequence::slice(int begin, int count) const {
    if (begin < 0 || begin + count > length()) throw RangeError("frame slice out of range");
    FrameSequence out;
    out.frames.assign(frames.begin() + begin, frames.begin() + begin + count);
    return out;
}

FrameSequence FrameSequence::reversed() const {
    FrameSequence out;
    out.frames.assign(frames.rbegin(), frames.rend());
    return out;
}

FrameSequence ClipTriplet::reassemble() const {
    FrameSequence out;
    out.frames = preceding.frames;
    out.frames.insert(out.frames.end(), middle.frames.begin(), middle.frames.end());
    out.frames.insert(out.frames.end(), following.frames.begin(), following.frames.end());
    return out;
}

// ---------------------------------------------------------------- scene generation

int bounce_position(int start, int velocity, int limit, int t) {
    if (limit <= 0) return 0;
    long period = 2L * limit;
    long raw = (start + static_cast<long>(velocity) * t) % period;
    if (raw < 0) raw += period;
    return static_cast<int>(raw <= limit ? raw : period - raw);
}

SceneSpec random_scene(int height, int width, int channels, int min_objects, int max_objects,
                       int min_speed, int max_speed, std::uint64_t seed, double background) {
    std::mt19937_64 rng(seed);
    SceneSpec spec;
    spec.height = height;
    spec.width = width;
    spec.channels = channels;
    spec.background = background;
    spec.seed = seed;
    int count = std::uniform_int_distribution<int>(min_objects, max_objects)(rng);
    for (int i = 0; i < count; ++i) {
        SceneObject obj;
        obj.kind = (rng() & 1) ? ShapeKind::Square : ShapeKind::Disc;
        int max_size = std::max(4, std::min(height, width) / 2);
        obj.size = std::uniform_int_distribution<int>(std::min(6, max_size), max_size)(rng);
        obj.x0 = std::uniform_int_distribution<int>(0, width - obj.size)(rng);
        obj.y0 = std::uniform_int_distribution<int>(0, height - obj.size)(rng);
        auto speed = [&]() {
            int s = std::uniform_int_distribution<int>(min_speed, max_speed)(rng);
            return (rng() & 1) ? s : -s;
        };
        obj.vx = speed();
        obj.vy = speed();
        obj.intensity = std::uniform_real_distribution<double>(0.5, 0.9)(rng);
        spec.objects.push_back(obj);
    }
    return spec;
}

namespace {

void rasterize(const SceneObject& obj, int x, int y, std::vector<double>& plane, int h, int w) {
    if (obj.kind == ShapeKind::Square) {
        for (int py = y; py < y + obj.size; ++py)
            for (int px = x; px < x + obj.size; ++px)
                plane[static_cast<long>(py) * w + px] =
                    std::max(plane[static_cast<long>(py) * w + px], obj.intensity);
    } else {
        // hard-edged disc inscribed in the size x size bounding box; integer
        // arithmetic keeps rasterization identical for identical positions
        double r = obj.size / 2.0;
        double cx = x + r - 0.5, cy = y + r - 0.5;
        for (int py = y; py < y + obj.size; ++py)
            for (int px = x; px < x + obj.size; ++px) {
                double dx = px - cx, dy = py - cy;
                if (dx * dx + dy * dy <= r * r)
                    plane[static_cast<long>(py) * w + px] =
                        std::max(plane[static_cast<long>(py) * w + px], obj.intensity);
            }
    }
}

}  // namespace

FrameSequence generate_clip(const SceneSpec& spec, int length) {
    if (length < 1) throw SpecError("clip length must be >= 1");
    for (const auto& obj : spec.objects) {
        if (obj.size > spec.width || obj.size > spec.height)
            throw SpecError("object larger than canvas");
        if (obj.x0 < 0 || obj.y0 < 0 || obj.x0 + obj.size > spec.width ||
            obj.y0 + obj.size > spec.height)
            throw SpecError("object outside canvas at t=0");
    }
    if (spec.background < 0.0 || spec.background > 1.0)
        throw SpecError("background outside [0, 1]");
    FrameSequence seq;
    for (int t = 0; t < length; ++t) {
        std::vector<double> plane(static_cast<long>(spec.height) * spec.width, spec.background);
        for (const auto& obj : spec.objects) {
            int x = bounce_position(obj.x0, obj.vx, spec.width - obj.size, t);
            int y = bounce_position(obj.y0, obj.vy, spec.height - obj.size, t);
            rasterize(obj, x, y, plane, spec.height, spec.width);
        }
        if (spec.channels == 1) {
            seq.frames.push_back(Tensor::from({1, spec.height, spec.width}, std::move(plane)));
        } else {
            std::vector<double> all;
            all.reserve(plane.size() * spec.channels);
            for (int c = 0; c < spec.channels; ++c) all.insert(all.end(), plane.begin(), plane.end());
            seq.frames.push_back(
                Tensor::from({spec.channels, spec.height, spec.width}, std::move(all)));
        }
    }
    return seq;
}

// ---------------------------------------------------------------- clip protocol

ClipTriplet split_clip(const FrameSequence& frames, int p, int m, int f) {
    if (p < 1 || m < 1 || f < 1) throw SplitError("p, m, f must all be positive");
    if (p + m + f != frames.length())
        throw SplitError("p+m+f = " + std::to_string(p + m + f) + " does not match clip length " +
                         std::to_string(frames.length()));
    return {frames.slice(0, p), frames.slice(p, m), frames.slice(p + m, f)};
}

namespace {

Tensor mirror_frame(const Tensor& frame) {
    int c = frame.shape()[0], h = frame.shape()[1], w = frame.shape()[2];
    std::vector<double> out(frame.size());
    const auto& in = frame.values();
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                out[(static_cast<long>(ch) * h + y) * w + x] =
                    in[(static_cast<long>(ch) * h + y) * w + (w - 1 - x)];
    return Tensor::from(frame.shape(), std::move(out));
}

FrameSequence mirror_sequence(const FrameSequence& seq) {
    FrameSequence out;
    for (const auto& f : seq.frames) out.frames.push_back(mirror_frame(f));
    return out;
}

}  // namespace

ClipTriplet mirror_clip(const ClipTriplet& clip) {
    return {mirror_sequence(clip.preceding), mirror_sequence(clip.middle),
            mirror_sequence(clip.following)};
}

ClipTriplet reverse_clip(const ClipTriplet& clip) {
    // reversing the whole clip maps {P, M, F} to {F^R, M^R, P^R}
    return {clip.following.reversed(), clip.middle.reversed(), clip.preceding.reversed()};
}

ClipTriplet augment(const ClipTriplet& clip, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(0.5);
    ClipTriplet out = clip;
    if (coin(rng)) out = mirror_clip(out);
    if (coin(rng)) out = reverse_clip(out);
    return out;
}

std::vector<ClipTriplet> make_test_windows(const FrameSequence& video, int p, int m, int f,
                                           int stride) {
    if (stride < 1) throw RangeError("window stride must be >= 1");
    int window = p + m + f;
    std::vector<ClipTriplet> out;
    for (int start = 0; start + window <= video.length(); start += stride)
        out.push_back(split_clip(video.slice(start, window), p, m, f));
    return out;
}

// ---------------------------------------------------------------- frame-folder I/O

namespace {

int quantize8(double v) {
    int q = static_cast<int>(std::floor(v * 255.0 + 0.5));
    return std::clamp(q, 0, 255);
}

void write_netpbm(const Tensor& frame, const std::string& file) {
    int c = frame.shape()[0], h = frame.shape()[1], w = frame.shape()[2];
    if (c != 1 && c != 3) throw FormatError("frame must have 1 or 3 channels for pgm/ppm");
    std::ofstream os(file, std::ios::binary);
    if (!os) throw IoError("cannot write " + file);
    os << (c == 1 ? "P5" : "P6") << "\n" << w << " " << h << "\n255\n";
    const auto& v = frame.values();
    std::vector<unsigned char> row(static_cast<long>(w) * c);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < c; ++ch)
                row[static_cast<long>(x) * c + ch] =
                    static_cast<unsigned char>(quantize8(v[(static_cast<long>(ch) * h + y) * w + x]));
        os.write(reinterpret_cast<const char*>(row.data()), row.size());
    }
    if (!os) throw IoError("short write to " + file);
}

Tensor read_netpbm(const std::string& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw IoError("cannot read " + file);
    std::string magic;
    is >> magic;
    if (magic != "P5" && magic != "P6") throw FormatError(file + ": unsupported format " + magic);
    int c = magic == "P5" ? 1 : 3;
    auto next_int = [&]() {
        // skip whitespace and '#' comments
        for (;;) {
            int ch = is.peek();
            if (ch == '#') {
                std::string line;
                std::getline(is, line);
            } else if (std::isspace(ch)) {
                is.get();
            } else {
                break;
            }
        }
        int v;
        if (!(is >> v)) throw FormatError(file + ": truncated header");
        return v;
    };
    int w = next_int(), h = next_int(), maxval = next_int();
    if (maxval != 255) throw FormatError(file + ": only 8-bit maxval 255 supported");
    is.get();  // single whitespace after maxval
    std::vector<unsigned char> raw(static_cast<long>(w) * h * c);
    is.read(reinterpret_cast<char*>(raw.data()), raw.size());
    if (is.gcount() != static_cast<std::streamsize>(raw.size()))
        throw IoError(file + ": truncated pixel data");
    std::vector<double> v(raw.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < c; ++ch)
                v[(static_cast<long>(ch) * h + y) * w + x] =
                    raw[(static_cast<long>(y) * w + x) * c + ch] / 255.0;
    return Tensor::from({c, h, w}, std::move(v));
}

}  // namespace

void save_frame_dir(const FrameSequence& frames, const std::string& path) {
    fs::create_directories(path);
    const char* ext = frames.channels() == 1 ? "pgm" : "ppm";
    for (int t = 0; t < frames.length(); ++t) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%06d.%s", t + 1, ext);
        write_netpbm(frames.frames[t], (fs::path(path) / name).string());
    }
}

FrameSequence load_frame_dir(const std::string& path) {
    if (!fs::is_directory(path)) throw IoError("not a directory: " + path);
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(path)) {
        if (!e.is_regular_file()) continue;
        std::string ext = e.path().extension().string();
        if (ext == ".pgm" || ext == ".ppm") files.push_back(e.path().string());
    }
    if (files.empty()) throw IoError("no frames in " + path);
    std::sort(files.begin(), files.end());
    FrameSequence seq;
    for (const auto& f : files) {
        Tensor frame = read_netpbm(f);
        if (!seq.frames.empty() && frame.shape() != seq.frames[0].shape())
            throw FormatError("inconsistent resolution at " + f);
        seq.frames.push_back(std::move(frame));
    }
    return seq;
}

void save_manifest(const std::vector<std::string>& clip_dirs, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path);
    for (const auto& d : clip_dirs) os << d << "\n";
}

std::vector<std::string> load_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot read " + path);
    std::vector<std::string> dirs;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) dirs.push_back(line);
    }
    return dirs;
}

}  // namespace midgap
