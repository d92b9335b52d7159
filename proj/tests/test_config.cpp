#include <gtest/gtest.h>

#include "ledvlc/config.hpp"

using namespace ledvlc;

TEST(KeyValues, SectionsCommentsAndWhitespace) {
    const auto kv = parse_key_values("# top\npreset = degree2\n[camera]\nf_number = 2.8  # inline\n\n[decode]\n  epsilon=0.08\n");
    EXPECT_EQ(kv.at("preset"), "degree2");
    EXPECT_EQ(kv.at("camera.f_number"), "2.8");
    EXPECT_EQ(kv.at("decode.epsilon"), "0.08");
}

TEST(KeyValues, MalformedLines) {
    EXPECT_THROW(parse_key_values("[camera\n"), Error);
    EXPECT_THROW(parse_key_values("just words\n"), Error);
    EXPECT_THROW(parse_key_values(" = 3\n"), Error);
}

TEST(Values, Parsing) {
    EXPECT_DOUBLE_EQ(parse_double("k", "1e-3"), 1e-3);
    EXPECT_THROW(parse_double("k", "1.0x"), Error);
    EXPECT_EQ(parse_int("k", "-4"), -4);
    EXPECT_THROW(parse_int("k", "4.5"), Error);
    EXPECT_TRUE(parse_bool("k", "true"));
    EXPECT_FALSE(parse_bool("k", "0"));
    EXPECT_THROW(parse_bool("k", "maybe"), Error);
    EXPECT_EQ(split_list("a, b ,c"), (std::vector<std::string>{"a", "b", "c"}));
}

TEST(Presets, KnownNames) {
    for (const char* name : {"table2", "degree1", "degree2", "degree3"}) {
        const Scene s = preset_scene(name);
        EXPECT_NO_THROW(s.validate()) << name;
    }
    EXPECT_THROW(preset_scene("degree4"), Error);
}

TEST(Presets, DegreeGeometryMatchesReferenceRows) {
    const Scene d2 = preset_degree(2);
    EXPECT_EQ(d2.delta_px, 22.0);
    EXPECT_EQ(d2.geometry.comm_m, 6.0);
    EXPECT_EQ(d2.calibration.c_exp_override, 54.0);
    EXPECT_EQ(isi_degree(preset_degree(1).delta_px, 42), IsiDegree::Degree1);
    EXPECT_EQ(isi_degree(preset_degree(3).delta_px, 62), IsiDegree::Degree3);
    EXPECT_TRUE(check_pilot_spacing(preset_degree(3).truth_grid(), pilot_pattern(16, preset_degree(3).calibration.pilot_stride),
                                    60.0));
}

TEST(Config, OverridesApplyOnTopOfPreset) {
    const auto cfg = load_config("table2", "preset = degree1\n[decode]\nepsilon = 0.12\n[channel]\nsigma = 0.01\npgm_bits = 8\n");
    EXPECT_EQ(cfg.preset, "degree1");
    EXPECT_EQ(cfg.scene.delta_px, 33.0);
    EXPECT_EQ(cfg.scene.decode.epsilon, 0.12);
    EXPECT_EQ(cfg.scene.noise.sigma, 0.01);
    EXPECT_EQ(cfg.pgm_bits, 8);
}

TEST(Config, HoughKeysOnlyTouchDecoding) {
    const auto base = load_config("degree2", "");
    const auto cfg = load_config("degree2", "[hough]\nvote_threshold = 0.2\n");
    EXPECT_EQ(cfg.scene.decode.hough.vote_threshold, 0.2);
    EXPECT_EQ(cfg.scene.calibration.hough.vote_threshold, base.scene.calibration.hough.vote_threshold);
}

TEST(Config, UnknownKeyAndRangeErrors) {
    EXPECT_THROW(load_config("table2", "[camera]\nzoom = 2\n"), Error);
    EXPECT_THROW(load_config("table2", "[decode]\ntheta = 0.7\n"), Error);
    EXPECT_THROW(load_config("table2", "[channel]\npgm_bits = 12\n"), Error);
    EXPECT_THROW(load_config("table2", "[camera]\nf_number = -1\n"), Error);
}

TEST(SweepSpecText, ParsesAllKeys) {
    const auto spec = parse_sweep_spec(
        "[sweep]\ndegrees = degree1, degree2\nratios = 0.05, 0.3\nepsilons = 0.04\nframes_per_point = 3\n"
        "seed = 9\ndecoders = proposed, lowdensity\nmax_overlaps = 5\nframe_rate = 500\nsigma = 0.02\n");
    EXPECT_EQ(spec.isi_degrees.size(), 2u);
    EXPECT_EQ(spec.lighting_ratios[1], 0.3);
    EXPECT_EQ(spec.frames_per_point, 3);
    EXPECT_EQ(spec.seed, 9u);
    EXPECT_EQ(spec.decoders[1], Decoder::LowDensity);
    EXPECT_EQ(spec.max_overlaps, 5);
    EXPECT_EQ(spec.frame_rate, 500.0);
    EXPECT_EQ(spec.sigma, 0.02);
    EXPECT_THROW(parse_sweep_spec("bogus = 1\n"), Error);
    EXPECT_THROW(parse_sweep_spec("frames_per_point = 0\n"), Error);
}
