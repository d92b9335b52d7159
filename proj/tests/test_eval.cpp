#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "ledvlc/config.hpp"
#include "ledvlc/eval.hpp"

using namespace ledvlc;

namespace {

SymbolMatrix from(const char* text) { return symbols_from_text(text); }

}  // namespace

TEST(Metrics, DenAndBer) {
    const auto truth = from("110\n000\n001\n");
    const auto got = from("100\n010\n011\n");
    EXPECT_EQ(den(got, truth), 1);
    EXPECT_EQ(hamming_errors(got, truth), 3);
    EXPECT_DOUBLE_EQ(ber(got, truth, BerMode::Paper), 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(ber(got, truth, BerMode::Hamming), 3.0 / 9.0);
}

TEST(Metrics, PaperBerUndefinedWithoutOnes) {
    const auto zero = from("00\n00\n");
    try {
        ber(zero, zero, BerMode::Paper);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::UndefinedBer);
    }
    DecodeReport rep;
    rep.symbols = zero;
    EXPECT_TRUE(std::isnan(frame_result(rep, zero).ber_paper));
}

TEST(Metrics, SizeMismatch) {
    EXPECT_THROW(den(SymbolMatrix(2), SymbolMatrix(3)), Error);
}

TEST(Metrics, ThroughputOracle) {
    std::vector<FrameResult> rs(3);
    rs[0].correct_bits = 256;
    rs[1].correct_bits = 250;
    rs[2].correct_bits = 254;
    EXPECT_DOUBLE_EQ(throughput(rs, 1000.0), 60.0 * 1000.0 * (256 + 250 + 254) / 3.0);
    EXPECT_EQ(throughput({}, 1000.0), 0.0);
    EXPECT_THROW(throughput(rs, 0.0), Error);
}

TEST(Metrics, FrameResultUsesDetections) {
    const auto truth = from("11\n00\n");
    DecodeReport rep;
    rep.symbols = from("11\n00\n");
    rep.detections = 5;  // no-alignment ablation counts raw centers
    const auto r = frame_result(rep, truth);
    EXPECT_EQ(r.den, 3);
    EXPECT_EQ(r.ber_hamming, 0.0);
    EXPECT_EQ(r.correct_bits, 4);
}

TEST(Patterns, ExactOneCountForGridRatios) {
    const IdealGrid g = IdealGrid::centered({640, 512}, 22.0, 16);
    for (int ones : {0, 1, 13, 80, 128, 256}) {
        const auto p = gen_pattern(16, ones / 256.0, -1, 54.0, g, 5);
        EXPECT_EQ(p.count_ones(), ones);
    }
    EXPECT_EQ(gen_pattern(16, 0.05, -1, 54.0, g, 5).count_ones(), 13);  // round(12.8)
}

TEST(Patterns, OverlapConstraintHolds) {
    const IdealGrid g = IdealGrid::centered({640, 512}, 22.0, 16);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto p = gen_pattern(16, 80 / 256.0, 5, 54.0, g, seed);
        EXPECT_LE(max_overlap_count(p, g, 54.0), 5);
    }
}

TEST(Patterns, InfeasibleConstraintReported) {
    const IdealGrid g = IdealGrid::centered({640, 512}, 15.0, 16);
    try {
        gen_pattern(16, 0.9, 0, 62.0, g, 1, 20);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ConstraintInfeasible);
    }
}

TEST(Patterns, OverlapCountOracle) {
    const IdealGrid g{{0, 0}, 10.0, 10.0, 3};
    const auto p = from("111\n111\n111\n");
    // radius 15: the center LED sees its 4 edge neighbours (10) and 4 diagonals (14.1).
    EXPECT_EQ(max_overlap_count(p, g, 30.0), 8);
    EXPECT_EQ(max_overlap_count(p, g, 20.0), 0);  // distance 10 is not strictly inside
}

TEST(Sweep, CsvShapeAndDeterminism) {
    SweepSpec spec;
    spec.isi_degrees = {"degree1"};
    spec.lighting_ratios = {0.1};
    spec.epsilons = {0.04, 0.08};
    spec.frames_per_point = 2;
    spec.decoders = {Decoder::Proposed, Decoder::LowDensity};
    const auto a = run_sweep(spec, {preset_degree(1)});
    const auto b = run_sweep(spec, {preset_degree(1)});
    const std::string csv = to_csv(a);
    EXPECT_EQ(csv, to_csv(b));
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, kSweepCsvHeader);
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 4);
    EXPECT_EQ(to_json(a, spec)["cells"].size(), 4u);
}

TEST(Sweep, SingleCellSingleRow) {
    SweepSpec spec;
    spec.isi_degrees = {"degree1"};
    spec.lighting_ratios = {0.05};
    spec.epsilons = {0.04};
    spec.frames_per_point = 1;
    const auto r = run_sweep(spec, {preset_degree(1)});
    ASSERT_EQ(r.cells.size(), 1u);
    EXPECT_FALSE(r.cells[0].failed);
    EXPECT_EQ(r.cells[0].frames, 1);
}

TEST(Sweep, LowDensityCarriesQuarterPayload) {
    SweepSpec spec;
    spec.isi_degrees = {"degree1"};
    spec.lighting_ratios = {0.3};
    spec.frames_per_point = 2;
    spec.decoders = {Decoder::LowDensity};
    const auto r = run_sweep(spec, {preset_degree(1)});
    ASSERT_EQ(r.cells.size(), 1u);
    for (const auto& f : r.cells[0].results) EXPECT_EQ(f.payload_bits, 64);
}

TEST(Sweep, SceneCountMustMatch) {
    SweepSpec spec;
    spec.isi_degrees = {"degree1", "degree2"};
    EXPECT_THROW(run_sweep(spec, {preset_degree(1)}), Error);
}

TEST(Sweep, FormatNumber) {
    EXPECT_EQ(format_number(0.0), "0");
    EXPECT_EQ(format_number(std::nan("")), "nan");
    EXPECT_EQ(format_number(0.125), "0.125");
}
