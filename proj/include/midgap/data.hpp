#pragma once
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "midgap/tensor.hpp"

namespace midgap {

// T frames of C x H x W pixels in [0, 1]
struct FrameSequence {
    std::vector<Tensor> frames;

    int length() const { return static_cast<int>(frames.size()); }
    int channels() const { return frames.at(0).shape()[0]; }
    int height() const { return frames.at(0).shape()[1]; }
    int width() const { return frames.at(0).shape()[2]; }
    FrameSequence slice(int begin, int count) const;
    FrameSequence reversed() const;
};

struct ClipTriplet {
    FrameSequence preceding;
    FrameSequence middle;
    FrameSequence following;

    int p() const { return preceding.length(); }
    int m() const { return middle.length(); }
    int f() const { return following.length(); }
    FrameSequence reassemble() const;
};

enum class ShapeKind { Square, Disc };

struct SceneObject {
    ShapeKind kind = ShapeKind::Square;
    int size = 8;      // square edge or disc diameter
    int x0 = 0, y0 = 0;  // top-left of bounding box at t=0
    int vx = 0, vy = 0;  // pixels per frame
    double intensity = 1.0;
};

struct SceneSpec {
    int height = 32;
    int width = 32;
    int channels = 1;
    double background = 0.0;
    std::vector<SceneObject> objects;
    std::uint64_t seed = 0;
};

// Deterministic random scene with 1-2 objects, speeds 1-2 px/frame.
SceneSpec random_scene(int height, int width, int channels, int min_objects, int max_objects,
                       int min_speed, int max_speed, std::uint64_t seed, double background = 0.1);

// Objects translate at constant velocity and reflect elastically off the
// canvas walls; positions are closed-form folds of the free trajectory, so
// any frame is computable independently of the others.
FrameSequence generate_clip(const SceneSpec& spec, int length);

ClipTriplet split_clip(const FrameSequence& frames, int p, int m, int f);

// Horizontal mirror with probability 1/2, then independent time reversal with
// probability 1/2; reversal swaps the preceding and following roles.
ClipTriplet augment(const ClipTriplet& clip, std::uint64_t seed);

ClipTriplet mirror_clip(const ClipTriplet& clip);
ClipTriplet reverse_clip(const ClipTriplet& clip);

// Sliding windows of p+m+f frames at the given stride, each split into a
// triplet. A video shorter than one window yields an empty list.
std::vector<ClipTriplet> make_test_windows(const FrameSequence& video, int p, int m, int f,
                                           int stride);

// Frame-folder I/O: frame_000001.pgm (grayscale) / .ppm (3-channel), 8-bit.
void save_frame_dir(const FrameSequence& frames, const std::string& path);
FrameSequence load_frame_dir(const std::string& path);

void save_manifest(const std::vector<std::string>& clip_dirs, const std::string& path);
std::vector<std::string> load_manifest(const std::string& path);

// closed-form axis position under elastic reflection, exposed for tests
int bounce_position(int start, int velocity, int limit, int t);

}  // namespace midgap
