#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "midgap/evaluator.hpp"
#include "midgap/gradsuite.hpp"
#include "midgap/report.hpp"
#include "midgap/trainer.hpp"

namespace fs = std::filesystem;
using namespace midgap;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string variant;
    std::string out = "out";
    std::string checkpoint;
    long seed = -1;
    long iters = -1;
    int middle = -1;
    int context = -1;
};

Config resolve_config(const CommonOpts& o) {
    Config cfg = o.config_path.empty() ? Config{} : load_config_file(o.config_path);
    if (!o.variant.empty()) cfg.set("variant", o.variant);
    if (o.seed >= 0) cfg.seed = static_cast<std::uint64_t>(o.seed);
    if (o.iters >= 0) cfg.iters = o.iters;
    if (o.middle >= 0) cfg.test_middle = o.middle;
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config_path, "config file (key = value lines)");
    cmd->add_option("--seed", o.seed, "override the config seed");
    cmd->add_option("--variant", o.variant, "override the model variant");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--checkpoint", o.checkpoint, "checkpoint path");
    cmd->add_option("--iters", o.iters, "override training iterations");
    cmd->add_option("--middle-frames", o.middle, "middle frames at evaluation time");
    cmd->add_option("--context", o.context, "context frames at evaluation time");
}

// builds models and loads weights; the effective config comes from the
// checkpoint, with CLI evaluation overrides applied on top
ModelSet load_models(const CommonOpts& o) {
    if (o.checkpoint.empty()) {
        Config cfg = resolve_config(o);
        if (variant_is_trained(variant_from_string(cfg.variant)))
            throw ConfigError("trained variant needs --checkpoint");
        return build_models(cfg);
    }
    Checkpoint ck = load_checkpoint(o.checkpoint);
    if (!o.variant.empty() && o.variant != ck.config.variant)
        throw ConfigError("checkpoint was trained as variant '" + ck.config.variant +
                          "', requested '" + o.variant + "'");
    ModelSet ms = build_models(ck.config);
    unpack_checkpoint(ck, ms, nullptr, nullptr);
    return ms;
}

EvalProtocol protocol_for(const Config& cfg, const CommonOpts& o) {
    EvalProtocol proto;
    proto.p = cfg.p;
    proto.f = cfg.f;
    proto.middle = o.middle > 0 ? o.middle : cfg.effective_test_middle();
    proto.stride = cfg.stride > 0 ? cfg.stride : proto.middle;
    proto.exclude_inf_psnr = cfg.exclude_inf_psnr;
    if (o.context > 0) proto.context = o.context;
    return proto;
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(std::stoi(cur));
            cur.clear();
        } else
            cur += c;
    }
    if (!cur.empty()) out.push_back(std::stoi(cur));
    return out;
}

int cmd_gen_data(const CommonOpts& o) {
    Config cfg = resolve_config(o);
    fs::create_directories(o.out);
    auto write_split = [&](const std::string& name, int count, int length,
                           std::uint64_t salt) {
        std::vector<std::string> dirs;
        auto videos = synthetic_videos(cfg, count, length, salt);
        for (std::size_t i = 0; i < videos.size(); ++i) {
            char sub[64];
            std::snprintf(sub, sizeof(sub), "%s_%04zu", name.c_str(), i);
            std::string dir = (fs::path(o.out) / sub).string();
            save_frame_dir(videos[i], dir);
            dirs.push_back(sub);
        }
        save_manifest(dirs, (fs::path(o.out) / (name + ".txt")).string());
    };
    write_split("train", cfg.train_videos, cfg.video_length, 0);
    write_split("test", cfg.test_videos, cfg.test_video_length, 0x5eed);
    std::cout << "wrote " << cfg.train_videos << " train + " << cfg.test_videos
              << " test clips under " << o.out << "\n";
    return 0;
}

int cmd_train(const CommonOpts& o) {
    Config cfg = resolve_config(o);
    Trainer trainer(cfg);
    std::cout << "training " << cfg.variant << " for " << cfg.iters << " iterations\n";
    auto trace = trainer.run(o.out);
    if (!trace.empty())
        std::cout << "final losses: g=" << trace.back().total_g << " d=" << trace.back().total_d
                  << "\n";
    std::cout << "checkpoint: " << (fs::path(o.out) / "final.mgp").string() << "\n";
    return 0;
}

int cmd_eval(const CommonOpts& o) {
    ModelSet ms = load_models(o);
    EvalProtocol proto = protocol_for(ms.cfg, o);
    auto videos = load_dataset(ms.cfg, false);
    MetricSeries series = evaluate(ms, videos, proto);
    fs::create_directories(o.out);
    write_series_csv({series}, (fs::path(o.out) / ("eval_" + series.model + ".csv")).string());
    std::printf("%-14s %6s %10s %10s %7s\n", "model", "t", "psnr", "ssim", "count");
    for (const auto& p : series.points)
        std::printf("%-14s %6d %10.4f %10.4f %7ld\n", series.model.c_str(), p.t, p.psnr, p.ssim,
                    p.count);
    std::printf("mean over frames: psnr=%.4f ssim=%.4f\n", series.mean_psnr(),
                series.mean_ssim());
    return 0;
}

int cmd_sweep_context(const CommonOpts& o, const std::string& counts) {
    ModelSet ms = load_models(o);
    EvalProtocol proto = protocol_for(ms.cfg, o);
    std::vector<int> list = counts.empty() ? std::vector<int>{2, 3, 4, 5} : parse_int_list(counts);
    int max_context = *std::max_element(list.begin(), list.end());
    proto.p = std::max(proto.p, max_context);
    proto.f = std::max(proto.f, max_context);
    auto videos = load_dataset(ms.cfg, false);
    auto rows = context_sweep(ms, videos, proto, list);
    std::printf("%8s %10s %10s\n", "context", "psnr", "ssim");
    for (const auto& r : rows) std::printf("%8d %10.4f %10.4f\n", r.context, r.mean_psnr, r.mean_ssim);
    return 0;
}

int cmd_sweep_middle(const CommonOpts& o, const std::string& counts) {
    ModelSet ms = load_models(o);
    EvalProtocol proto = protocol_for(ms.cfg, o);
    std::vector<int> list = counts.empty() ? std::vector<int>{3, 4, 5} : parse_int_list(counts);
    auto videos = load_dataset(ms.cfg, false);
    auto series = middle_sweep(ms, videos, proto, list);
    fs::create_directories(o.out);
    write_series_csv(series, (fs::path(o.out) / "sweep_middle.csv").string());
    for (const auto& s : series)
        std::printf("%-14s mean psnr=%.4f ssim=%.4f\n", s.model.c_str(), s.mean_psnr(),
                    s.mean_ssim());
    return 0;
}

int cmd_report(const CommonOpts& o, const std::vector<std::string>& csvs) {
    std::vector<MetricSeries> all;
    for (const auto& path : csvs)
        for (auto& s : read_series_csv(path)) all.push_back(std::move(s));
    write_report(all, o.out);
    std::cout << "report written to " << o.out << "\n";
    return 0;
}

int cmd_grad_check(int seeds) {
    auto cases = run_gradient_suite(seeds);
    bool all_ok = true;
    for (const auto& c : cases) {
        std::printf("%-28s max rel err %.3e  [%s]\n", c.name.c_str(), c.max_error,
                    c.passed() ? "ok" : "FAIL");
        all_ok = all_ok && c.passed();
    }
    return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"midgap: bidirectional video frame inpainting on synthetic clips"};
    app.require_subcommand(1);

    CommonOpts o_gen, o_train, o_eval, o_sc, o_sm, o_rep;
    std::string sc_counts, sm_counts;
    std::vector<std::string> report_csvs;
    int gc_seeds = 5;

    add_common(app.add_subcommand("gen-data", "write synthetic frame folders + manifests"),
               o_gen);
    add_common(app.add_subcommand("train", "train a variant and write checkpoints"), o_train);
    add_common(app.add_subcommand("eval", "per-frame PSNR/SSIM of a model"), o_eval);
    auto* sc = app.add_subcommand("sweep-context", "metrics vs number of context frames");
    add_common(sc, o_sc);
    sc->add_option("--counts", sc_counts, "comma list of context counts (default 2,3,4,5)");
    auto* sm = app.add_subcommand("sweep-middle", "metrics vs number of middle frames");
    add_common(sm, o_sm);
    sm->add_option("--counts", sm_counts, "comma list of middle counts (default 3,4,5)");
    auto* rep = app.add_subcommand("report", "render csv series into svg plots and strips");
    add_common(rep, o_rep);
    rep->add_option("csvs", report_csvs, "metric series csv files")->required();
    auto* gc = app.add_subcommand("grad-check", "finite-difference check of every operation");
    gc->add_option("--seeds", gc_seeds, "random instances per operation");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("gen-data")) return cmd_gen_data(o_gen);
        if (app.got_subcommand("train")) return cmd_train(o_train);
        if (app.got_subcommand("eval")) return cmd_eval(o_eval);
        if (app.got_subcommand("sweep-context")) return cmd_sweep_context(o_sc, sc_counts);
        if (app.got_subcommand("sweep-middle")) return cmd_sweep_middle(o_sm, sm_counts);
        if (app.got_subcommand("report")) return cmd_report(o_rep, report_csvs);
        if (app.got_subcommand("grad-check")) return cmd_grad_check(gc_seeds);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
