#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "midgap/evaluator.hpp"
#include "midgap/report.hpp"
#include "midgap/trainer.hpp"

using namespace midgap;
namespace fs = std::filesystem;

namespace {

// small fast training config on 16x16 frames (no blender at this size)
Config tiny_config(const std::string& variant = "bi_tw") {
    Config cfg;
    cfg.variant = variant;
    cfg.canvas = 16;
    cfg.p = cfg.m = cfg.f = 2;
    cfg.test_middle = 3;
    cfg.video_length = 8;
    cfg.test_video_length = 10;
    cfg.train_videos = 12;
    cfg.test_videos = 4;
    cfg.iters = 3;
    cfg.batch = 2;
    cfg.channels_pred = {4, 6, 8};
    cfg.act_channels = 8;
    cfg.channels_disc = {4, 8};
    cfg.lr = 1e-3;
    cfg.seed = 5;
    return cfg;
}

Config tiny_tai_config() {
    Config cfg = tiny_config("tai");
    cfg.canvas = 32;
    cfg.channels_blend = {8, 8, 4};
    cfg.blend_convs = 1;
    cfg.kernel_size = 3;
    return cfg;
}

std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

bool same_points(const MetricSeries& a, const MetricSeries& b) {
    if (a.points.size() != b.points.size()) return false;
    for (std::size_t i = 0; i < a.points.size(); ++i) {
        if (a.points[i].t != b.points[i].t) return false;
        if (a.points[i].psnr != b.points[i].psnr) return false;
        if (a.points[i].ssim != b.points[i].ssim) return false;
        if (a.points[i].count != b.points[i].count) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("config parsing: defaults, comments, overrides, rejects") {
    Config cfg = parse_config_text("# comment line\nvariant = bi_sa\n  p = 4 # trailing\n\nm=2\n");
    CHECK(cfg.variant == "bi_sa");
    CHECK(cfg.p == 4);
    CHECK(cfg.m == 2);
    CHECK(cfg.f == 3);          // untouched default
    CHECK(cfg.beta == 0.002);   // untouched default
    CHECK(cfg.effective_test_middle() == 4);  // 2*m when unset
    CHECK(cfg.effective_stride() == 4);

    CHECK_THROWS_AS(parse_config_text("nonsense_key = 3\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("p 3\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("p = abc\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("variant = bogus\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("fresh_fake = maybe\n"), ConfigError);
}

TEST_CASE("config serialize/parse round trip") {
    Config cfg = tiny_tai_config();
    cfg.lr = 3.25e-4;
    cfg.channels_pred = {5, 7, 9};
    Config back = parse_config_text(cfg.serialize());
    CHECK(back.serialize() == cfg.serialize());
    CHECK(back.channels_pred == cfg.channels_pred);
    CHECK(back.lr == cfg.lr);
}

TEST_CASE("variant classification") {
    CHECK(variant_is_trained(Variant::TAI));
    CHECK(variant_is_trained(Variant::ForwardOnly));
    CHECK_FALSE(variant_is_trained(Variant::RepeatP));
    CHECK(variant_needs_blender(Variant::TWI));
    CHECK_FALSE(variant_needs_blender(Variant::BiSA));
    CHECK(variant_name(variant_from_string("bi_tw")) == "bi_tw");
}

TEST_CASE("one training iteration updates both networks") {
    Trainer trainer(tiny_config());
    std::uint64_t g_before = param_hash(trainer.models().generator_params());
    std::uint64_t d_before = param_hash(trainer.models().discriminator_params());
    trainer.train_iteration();
    CHECK(param_hash(trainer.models().generator_params()) != g_before);
    CHECK(param_hash(trainer.models().discriminator_params()) != d_before);
}

TEST_CASE("generator step leaves discriminator parameters untouched") {
    Config cfg = tiny_config();
    cfg.d_steps = 0;  // run only the generator half
    Trainer trainer(cfg);
    std::uint64_t d_before = param_hash(trainer.models().discriminator_params());
    std::uint64_t g_before = param_hash(trainer.models().generator_params());
    trainer.train_iteration();
    CHECK(param_hash(trainer.models().discriminator_params()) == d_before);
    CHECK(param_hash(trainer.models().generator_params()) != g_before);
}

TEST_CASE("training is seed deterministic") {
    Config cfg = tiny_config();
    cfg.iters = 4;
    Trainer a(cfg), b(cfg);
    auto ta = a.run(""), tb = b.run("");
    REQUIRE(ta.size() == tb.size());
    for (std::size_t i = 0; i < ta.size(); ++i) {
        CHECK(ta[i].total_g == tb[i].total_g);
        CHECK(ta[i].total_d == tb[i].total_d);
    }
    CHECK(param_hash(a.models().generator_params()) ==
          param_hash(b.models().generator_params()));
}

TEST_CASE("poisoned weights raise TrainingDiverged with the iteration index") {
    Trainer trainer(tiny_config());
    // poison the output projection so the predicted frames (and the loss)
    // become non-finite
    Tensor w = trainer.models().generator_params().find("pred.out_proj.w");
    std::fill(w.values_mut().begin(), w.values_mut().end(),
              std::numeric_limits<double>::quiet_NaN());
    try {
        trainer.train_iteration();
        FAIL("expected TrainingDiverged");
    } catch (const TrainingDiverged& e) {
        CHECK(e.iteration == 0);
    }
}

TEST_CASE("tai variant trains end to end at 32x32") {
    Config cfg = tiny_tai_config();
    cfg.iters = 2;
    Trainer trainer(cfg);
    std::uint64_t g_before = param_hash(trainer.models().generator_params());
    auto trace = trainer.run("");
    CHECK(trace.size() == 2);
    CHECK(param_hash(trainer.models().generator_params()) != g_before);
    for (const auto& r : trace) {
        CHECK(std::isfinite(r.total_g));
        CHECK(std::isfinite(r.total_d));
        CHECK(r.img_forward > 0);
        CHECK(r.img_backward > 0);
        CHECK(r.img_final > 0);
    }
}

TEST_CASE("checkpoint round trip is bit exact") {
    Config cfg = tiny_config();
    cfg.iters = 2;
    Trainer trainer(cfg);
    trainer.run("");
    Checkpoint ck = trainer.checkpoint();
    std::string path = (fs::temp_directory_path() / "midgap_ck_test.mgp").string();
    save_checkpoint(ck, path);
    Checkpoint back = load_checkpoint(path);
    CHECK(back.iteration == ck.iteration);
    CHECK(back.rng_state == ck.rng_state);
    CHECK(back.config.serialize() == ck.config.serialize());
    REQUIRE(back.tensors.size() == ck.tensors.size());
    for (std::size_t i = 0; i < ck.tensors.size(); ++i) {
        CHECK(back.tensors[i].first == ck.tensors[i].first);
        CHECK(back.tensors[i].second.shape() == ck.tensors[i].second.shape());
        CHECK(back.tensors[i].second.values() == ck.tensors[i].second.values());
    }
    // byte-identical re-serialization
    std::string path2 = (fs::temp_directory_path() / "midgap_ck_test2.mgp").string();
    save_checkpoint(back, path2);
    CHECK(read_file(path) == read_file(path2));
    fs::remove(path);
    fs::remove(path2);
}

TEST_CASE("checkpoint with mismatched shapes is rejected before any write") {
    Config cfg = tiny_config();
    Trainer trainer(cfg);
    Checkpoint ck = trainer.checkpoint();

    Config other = cfg;
    other.channels_pred = {6, 8, 10};  // different architecture
    ModelSet victim = build_models(other);
    std::uint64_t before = param_hash(victim.generator_params());
    CHECK_THROWS_AS(unpack_checkpoint(ck, victim, nullptr, nullptr), ConfigError);
    CHECK(param_hash(victim.generator_params()) == before);
}

TEST_CASE("checkpoint for a simpler variant cannot feed a blender model") {
    Trainer trainer(tiny_config("bi_sa"));
    Checkpoint ck = trainer.checkpoint();
    Config tai = tiny_tai_config();
    ModelSet ms = build_models(tai);
    CHECK_THROWS_AS(unpack_checkpoint(ck, ms, nullptr, nullptr), ConfigError);
}

TEST_CASE("handcrafted variants evaluate without a checkpoint") {
    Config cfg = tiny_config("repeat_p");
    ModelSet ms = build_models(cfg);
    CHECK_FALSE(ms.predictor.has_value());
    auto videos = load_dataset(cfg, false);
    EvalProtocol proto{cfg.p, cfg.test_middle, cfg.f, cfg.test_middle, 0, false};
    MetricSeries series = evaluate(ms, videos, proto);
    REQUIRE(series.points.size() == 3);
    CHECK(series.points[0].t == cfg.p + 1);
    CHECK(series.points.back().t == cfg.p + 3);
    for (const auto& pt : series.points) CHECK(pt.count > 0);
}

TEST_CASE("repeat_p is perfect on static clips") {
    Config cfg = tiny_config("repeat_p");
    cfg.speed_min = cfg.speed_max = 0;  // static scenes
    ModelSet ms = build_models(cfg);
    auto videos = load_dataset(cfg, false);
    EvalProtocol proto{cfg.p, 3, cfg.f, 3, 0, false};
    MetricSeries series = evaluate(ms, videos, proto);
    for (const auto& pt : series.points) {
        CHECK(pt.ssim == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(std::isinf(pt.psnr));
    }
}

TEST_CASE("evaluation never mutates weights") {
    Config cfg = tiny_config();
    cfg.iters = 1;
    Trainer trainer(cfg);
    trainer.run("");
    std::uint64_t before = param_hash(trainer.models().generator_params());
    auto videos = load_dataset(cfg, false);
    EvalProtocol proto{cfg.p, cfg.test_middle, cfg.f, cfg.test_middle, 0, false};
    evaluate(trainer.models(), videos, proto);
    CHECK(param_hash(trainer.models().generator_params()) == before);
}

TEST_CASE("save, load, evaluate reproduces the metric series bit for bit") {
    Config cfg = tiny_config();
    cfg.iters = 2;
    Trainer trainer(cfg);
    trainer.run("");
    auto videos = load_dataset(cfg, false);
    EvalProtocol proto{cfg.p, cfg.test_middle, cfg.f, cfg.test_middle, 0, false};
    MetricSeries direct = evaluate(trainer.models(), videos, proto);

    std::string path = (fs::temp_directory_path() / "midgap_ck_eval.mgp").string();
    save_checkpoint(trainer.checkpoint(), path);
    Checkpoint ck = load_checkpoint(path);
    ModelSet restored = build_models(ck.config);
    unpack_checkpoint(ck, restored, nullptr, nullptr);
    MetricSeries loaded = evaluate(restored, videos, proto);
    CHECK(same_points(direct, loaded));
    fs::remove(path);
}

TEST_CASE("context sweep rows and the full-context identity") {
    Config cfg = tiny_config();
    cfg.iters = 1;
    Trainer trainer(cfg);
    trainer.run("");
    auto videos = load_dataset(cfg, false);
    EvalProtocol proto{cfg.p, cfg.test_middle, cfg.f, cfg.test_middle, 0, false};
    auto rows = context_sweep(trainer.models(), videos, proto, {1, 2});
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].context == 1);
    CHECK(rows[1].context == 2);
    // context = p reproduces plain evaluation
    MetricSeries plain = evaluate(trainer.models(), videos, proto);
    CHECK(rows[1].mean_ssim == doctest::Approx(plain.mean_ssim()).epsilon(1e-15));
    CHECK_THROWS_AS(context_sweep(trainer.models(), videos, proto, {5}), RangeError);
}

TEST_CASE("middle sweep reproduces evaluate at the training count") {
    Config cfg = tiny_config();
    cfg.iters = 1;
    Trainer trainer(cfg);
    trainer.run("");
    auto videos = load_dataset(cfg, false);
    EvalProtocol proto{cfg.p, cfg.m, cfg.f, cfg.m, 0, false};
    auto series = middle_sweep(trainer.models(), videos, proto, {cfg.m, cfg.m + 1});
    REQUIRE(series.size() == 2);
    MetricSeries plain = evaluate(trainer.models(), videos, proto);
    REQUIRE(series[0].points.size() == plain.points.size());
    for (std::size_t i = 0; i < plain.points.size(); ++i)
        CHECK(series[0].points[i].ssim == plain.points[i].ssim);
    CHECK(series[1].points.size() == static_cast<std::size_t>(cfg.m + 1));
}

TEST_CASE("MIDGAP_THREADS parallel evaluation gives identical results") {
    Config cfg = tiny_config();
    cfg.iters = 1;
    Trainer trainer(cfg);
    trainer.run("");
    auto videos = load_dataset(cfg, false);
    EvalProtocol proto{cfg.p, cfg.test_middle, cfg.f, cfg.test_middle, 0, false};
    MetricSeries serial = evaluate(trainer.models(), videos, proto);
    setenv("MIDGAP_THREADS", "3", 1);
    MetricSeries parallel = evaluate(trainer.models(), videos, proto);
    unsetenv("MIDGAP_THREADS");
    CHECK(same_points(serial, parallel));
}

TEST_CASE("loss trace file has one row per iteration") {
    Config cfg = tiny_config();
    cfg.iters = 3;
    Trainer trainer(cfg);
    std::string dir = (fs::temp_directory_path() / "midgap_run").string();
    fs::remove_all(dir);
    trainer.run(dir);
    std::string log = read_file(dir + "/train_log.csv");
    int lines = 0;
    for (char c : log)
        if (c == '\n') ++lines;
    CHECK(lines == 4);  // header + 3 iterations
    CHECK(fs::exists(dir + "/final.mgp"));
    fs::remove_all(dir);
}

TEST_CASE("report: csv rows, svg polylines, deterministic bytes") {
    MetricSeries s1, s2;
    s1.model = "model_a";
    s2.model = "model_b";
    for (int t = 4; t <= 6; ++t) {
        s1.points.push_back({t, 20.0 + t, 0.8 + 0.01 * t, 7});
        s2.points.push_back({t, 18.0 + t, 0.7 + 0.01 * t, 7});
    }
    // a couple of sample frames so the strip writer is exercised
    for (int t = 0; t < 3; ++t) {
        s1.sample_truth.frames.push_back(Tensor::full({1, 4, 4}, 0.2 + 0.1 * t));
        s1.sample_pred.frames.push_back(Tensor::full({1, 4, 4}, 0.25 + 0.1 * t));
    }
    std::string dir = (fs::temp_directory_path() / "midgap_report").string();
    fs::remove_all(dir);
    write_report({s1, s2}, dir);

    std::string csv = read_file(dir + "/metrics.csv");
    int rows = 0;
    for (char c : csv)
        if (c == '\n') ++rows;
    CHECK(rows == 1 + 2 * 3);  // header + models x timesteps

    auto parsed = read_series_csv(dir + "/metrics.csv");
    REQUIRE(parsed.size() == 2);
    CHECK(parsed[0].model == "model_a");
    CHECK(parsed[0].points.size() == 3);
    CHECK(parsed[1].points[2].psnr == doctest::Approx(24.0));

    std::string svg = read_file(dir + "/ssim.svg");
    CHECK(svg.find("<?xml") == 0);
    CHECK(svg.rfind("</svg>\n") == svg.size() - 7);
    int polylines = 0;
    for (std::size_t pos = svg.find("<polyline"); pos != std::string::npos;
         pos = svg.find("<polyline", pos + 1))
        ++polylines;
    CHECK(polylines == 2);
    CHECK(fs::exists(dir + "/strip_model_a"));

    // byte-identical rerun
    std::string svg_psnr = read_file(dir + "/psnr.svg");
    write_report({s1, s2}, dir);
    CHECK(read_file(dir + "/metrics.csv") == csv);
    CHECK(read_file(dir + "/ssim.svg") == svg);
    CHECK(read_file(dir + "/psnr.svg") == svg_psnr);
    fs::remove_all(dir);
}

TEST_CASE("infinite psnr serializes and parses through the csv") {
    MetricSeries s;
    s.model = "still";
    s.points.push_back({3, std::numeric_limits<double>::infinity(), 1.0, 2});
    std::string path = (fs::temp_directory_path() / "midgap_inf.csv").string();
    write_series_csv({s}, path);
    auto back = read_series_csv(path);
    REQUIRE(back.size() == 1);
    CHECK(std::isinf(back[0].points[0].psnr));
    fs::remove(path);
}

TEST_CASE("forward-only variant trains and evaluates") {
    Config cfg = tiny_config("forward_only");
    cfg.iters = 2;
    Trainer trainer(cfg);
    auto trace = trainer.run("");
    CHECK(trace.size() == 2);
    // forward-only supervises a single image term
    CHECK(trace[0].img_forward == 0.0);
    CHECK(trace[0].img_backward == 0.0);
    CHECK(trace[0].img_final > 0.0);
    auto videos = load_dataset(cfg, false);
    EvalProtocol proto{cfg.p, cfg.test_middle, cfg.f, cfg.test_middle, 0, false};
    MetricSeries series = evaluate(trainer.models(), videos, proto);
    CHECK(series.points.size() == 3);
}
