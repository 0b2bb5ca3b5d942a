#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "midgap/common.hpp"

namespace midgap {

enum class Variant { TAI, TWI, BiTW, BiSA, ForwardOnly, RepeatP, RepeatF, SaPF, TwPF };

Variant variant_from_string(const std::string& s);
std::string variant_name(Variant v);
bool variant_is_trained(Variant v);
bool variant_needs_blender(Variant v);

// Flat key=value configuration; '#' starts a comment, unknown keys are
// rejected, every field has a default.
struct Config {
    std::string variant = "tai";

    // clip protocol
    int p = 3, m = 3, f = 3;
    int test_middle = 0;  // 0 means 2*m (train-short / test-long)
    int stride = 0;       // test window stride; 0 means test_middle

    // dataset: "synthetic" or a manifest path
    std::string data = "synthetic";
    int canvas = 32;
    int frame_channels = 1;
    int train_videos = 256;
    int test_videos = 24;
    int video_length = 11;
    int test_video_length = 16;
    int objects_min = 1, objects_max = 2;
    int speed_min = 1, speed_max = 2;
    double background = 0.1;
    std::uint64_t data_seed = 7777;

    // optimization
    long iters = 1500;
    int batch = 4;
    double lr = 1e-4;
    double adam_beta1 = 0.5, adam_beta2 = 0.999;
    double alpha = 1.0, beta = 0.002;
    int d_steps = 1;
    bool fresh_fake = true;
    long checkpoint_every = 0;  // 0: final checkpoint only
    std::uint64_t seed = 1;

    // architecture
    int kernel_size = 5;
    std::vector<int> channels_pred = {12, 24, 48};
    int act_channels = 48;
    std::vector<int> channels_blend = {48, 64, 12};  // encoder1, encoder2, decoder1 widths
    int pred_convs = 1;
    int blend_convs = 2;
    std::vector<int> channels_disc = {12, 24, 48, 48};
    int power_iters = 1;
    double sn_lipschitz = 3.0;
    bool paper_faithful = false;

    // evaluation
    bool exclude_inf_psnr = false;

    int effective_test_middle() const { return test_middle > 0 ? test_middle : 2 * m; }
    int effective_stride() const { return stride > 0 ? stride : effective_test_middle(); }

    void set(const std::string& key, const std::string& value);
    std::string serialize() const;  // canonical key=value text
};

Config parse_config_text(const std::string& text);
Config load_config_file(const std::string& path);

}  // namespace midgap
