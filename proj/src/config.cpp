#include "midgap/config.hpp"

#include <fstream>
#include <sstream>

namespace midgap {

Variant variant_from_string(const std::string& s) {
    if (s == "tai") return Variant::TAI;
    if (s == "twi") return Variant::TWI;
    if (s == "bi_tw") return Variant::BiTW;
    if (s == "bi_sa") return Variant::BiSA;
    if (s == "forward_only") return Variant::ForwardOnly;
    if (s == "repeat_p") return Variant::RepeatP;
    if (s == "repeat_f") return Variant::RepeatF;
    if (s == "sa_pf") return Variant::SaPF;
    if (s == "tw_pf") return Variant::TwPF;
    throw ConfigError("unknown variant: " + s);
}

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::TAI: return "tai";
        case Variant::TWI: return "twi";
        case Variant::BiTW: return "bi_tw";
        case Variant::BiSA: return "bi_sa";
        case Variant::ForwardOnly: return "forward_only";
        case Variant::RepeatP: return "repeat_p";
        case Variant::RepeatF: return "repeat_f";
        case Variant::SaPF: return "sa_pf";
        case Variant::TwPF: return "tw_pf";
    }
    return "?";
}

bool variant_is_trained(Variant v) {
    switch (v) {
        case Variant::RepeatP:
        case Variant::RepeatF:
        case Variant::SaPF:
        case Variant::TwPF: return false;
        default: return true;
    }
}

bool variant_needs_blender(Variant v) { return v == Variant::TAI || v == Variant::TWI; }

namespace {

long to_long(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        long out = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("bad integer for " + key + ": '" + v + "'");
    }
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("bad number for " + key + ": '" + v + "'");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("bad boolean for " + key + ": '" + v + "'");
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(static_cast<int>(to_long(key, item)));
    if (out.empty()) throw ConfigError("empty list for " + key);
    return out;
}

std::string list_str(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

void Config::set(const std::string& key, const std::string& value) {
    if (key == "variant") {
        variant_from_string(value);  // validates
        variant = value;
    } else if (key == "p") p = static_cast<int>(to_long(key, value));
    else if (key == "m") m = static_cast<int>(to_long(key, value));
    else if (key == "f") f = static_cast<int>(to_long(key, value));
    else if (key == "test_middle") test_middle = static_cast<int>(to_long(key, value));
    else if (key == "stride") stride = static_cast<int>(to_long(key, value));
    else if (key == "data") data = value;
    else if (key == "canvas") canvas = static_cast<int>(to_long(key, value));
    else if (key == "frame_channels") frame_channels = static_cast<int>(to_long(key, value));
    else if (key == "train_videos") train_videos = static_cast<int>(to_long(key, value));
    else if (key == "test_videos") test_videos = static_cast<int>(to_long(key, value));
    else if (key == "video_length") video_length = static_cast<int>(to_long(key, value));
    else if (key == "test_video_length") test_video_length = static_cast<int>(to_long(key, value));
    else if (key == "objects_min") objects_min = static_cast<int>(to_long(key, value));
    else if (key == "objects_max") objects_max = static_cast<int>(to_long(key, value));
    else if (key == "speed_min") speed_min = static_cast<int>(to_long(key, value));
    else if (key == "speed_max") speed_max = static_cast<int>(to_long(key, value));
    else if (key == "background") background = to_double(key, value);
    else if (key == "data_seed") data_seed = static_cast<std::uint64_t>(to_long(key, value));
    else if (key == "iters") iters = to_long(key, value);
    else if (key == "batch") batch = static_cast<int>(to_long(key, value));
    else if (key == "lr") lr = to_double(key, value);
    else if (key == "adam_beta1") adam_beta1 = to_double(key, value);
    else if (key == "adam_beta2") adam_beta2 = to_double(key, value);
    else if (key == "alpha") alpha = to_double(key, value);
    else if (key == "beta") beta = to_double(key, value);
    else if (key == "d_steps") d_steps = static_cast<int>(to_long(key, value));
    else if (key == "fresh_fake") fresh_fake = to_bool(key, value);
    else if (key == "checkpoint_every") checkpoint_every = to_long(key, value);
    else if (key == "seed") seed = static_cast<std::uint64_t>(to_long(key, value));
    else if (key == "kernel_size") kernel_size = static_cast<int>(to_long(key, value));
    else if (key == "channels_pred") channels_pred = to_int_list(key, value);
    else if (key == "act_channels") act_channels = static_cast<int>(to_long(key, value));
    else if (key == "channels_blend") channels_blend = to_int_list(key, value);
    else if (key == "pred_convs") pred_convs = static_cast<int>(to_long(key, value));
    else if (key == "blend_convs") blend_convs = static_cast<int>(to_long(key, value));
    else if (key == "channels_disc") channels_disc = to_int_list(key, value);
    else if (key == "power_iters") power_iters = static_cast<int>(to_long(key, value));
    else if (key == "sn_lipschitz") sn_lipschitz = to_double(key, value);
    else if (key == "paper_faithful") paper_faithful = to_bool(key, value);
    else if (key == "exclude_inf_psnr") exclude_inf_psnr = to_bool(key, value);
    else throw ConfigError("unknown config key: " + key);
}

std::string Config::serialize() const {
    std::ostringstream os;
    char buf[64];
    auto fmt = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    os << "variant = " << variant << "\n";
    os << "p = " << p << "\nm = " << m << "\nf = " << f << "\n";
    os << "test_middle = " << test_middle << "\nstride = " << stride << "\n";
    os << "data = " << data << "\n";
    os << "canvas = " << canvas << "\nframe_channels = " << frame_channels << "\n";
    os << "train_videos = " << train_videos << "\ntest_videos = " << test_videos << "\n";
    os << "video_length = " << video_length << "\ntest_video_length = " << test_video_length
       << "\n";
    os << "objects_min = " << objects_min << "\nobjects_max = " << objects_max << "\n";
    os << "speed_min = " << speed_min << "\nspeed_max = " << speed_max << "\n";
    os << "background = " << fmt(background) << "\n";
    os << "data_seed = " << data_seed << "\n";
    os << "iters = " << iters << "\nbatch = " << batch << "\n";
    os << "lr = " << fmt(lr) << "\n";
    os << "adam_beta1 = " << fmt(adam_beta1) << "\nadam_beta2 = " << fmt(adam_beta2) << "\n";
    os << "alpha = " << fmt(alpha) << "\nbeta = " << fmt(beta) << "\n";
    os << "d_steps = " << d_steps << "\nfresh_fake = " << (fresh_fake ? "true" : "false") << "\n";
    os << "checkpoint_every = " << checkpoint_every << "\nseed = " << seed << "\n";
    os << "kernel_size = " << kernel_size << "\n";
    os << "channels_pred = " << list_str(channels_pred) << "\n";
    os << "act_channels = " << act_channels << "\n";
    os << "channels_blend = " << list_str(channels_blend) << "\n";
    os << "pred_convs = " << pred_convs << "\nblend_convs = " << blend_convs << "\n";
    os << "channels_disc = " << list_str(channels_disc) << "\n";
    os << "power_iters = " << power_iters << "\nsn_lipschitz = " << fmt(sn_lipschitz) << "\n";
    os << "paper_faithful = " << (paper_faithful ? "true" : "false") << "\n";
    os << "exclude_inf_psnr = " << (exclude_inf_psnr ? "true" : "false") << "\n";
    return os.str();
}

Config parse_config_text(const std::string& text) {
    Config cfg;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        cfg.set(key, value);
    }
    return cfg;
}

Config load_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot read config " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config_text(ss.str());
}

}  // namespace midgap
