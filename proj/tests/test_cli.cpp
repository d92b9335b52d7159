#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ledvlc/cli.hpp"

namespace fs = std::filesystem;
using namespace ledvlc;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "ledvlc");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

void write(const fs::path& p, const std::string& text) {
    std::ofstream(p, std::ios::binary) << text;
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("ledvlc_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    std::string p(const std::string& name) const { return (dir_ / name).string(); }
    fs::path dir_;
};

}  // namespace

TEST_F(Cli, PilotFrameHasThirtySixOnes) {
    const auto r = run_cli({"simulate", "--preset", "degree2", "--pilot", "--out", p("sim")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto truth = symbols_from_text(read_file(p("sim/pilot_000.truth.txt")));
    EXPECT_EQ(truth.count_ones(), 36);
    const Frame f = read_pgm(p("sim/pilot_000.pgm"));
    EXPECT_EQ(f.width(), 1280);
    EXPECT_EQ(f.height(), 1024);
}

TEST_F(Cli, ZeroRatioNoiselessIsBlack) {
    write(p("c.ini"), "[channel]\nsigma = 0\n");
    const auto r = run_cli({"simulate", "--config", p("c.ini"), "--ratio", "0", "--out", p("sim")});
    ASSERT_EQ(r.code, 0) << r.err;
    for (double v : read_pgm(p("sim/frame_000.pgm")).data()) ASSERT_EQ(v, 0.0);
}

TEST_F(Cli, InvalidConfigLeavesNoFiles) {
    write(p("bad.ini"), "[decode]\ntheta = 0.9\n");
    const auto r = run_cli({"simulate", "--config", p("bad.ini"), "--out", p("sim")});
    EXPECT_EQ(r.code, 2);
    EXPECT_FALSE(fs::exists(p("sim")));
    EXPECT_NE(r.err.find("theta"), std::string::npos);
}

TEST_F(Cli, UnknownSubcommandIsValidationError) {
    EXPECT_EQ(run_cli({"explode"}).code, 2);
    EXPECT_EQ(run_cli({}).code, 2);
}

TEST_F(Cli, CalibrateDecodeRoundTrip) {
    write(p("c.ini"), "preset = degree1\n[channel]\nsigma = 0.02\n");
    ASSERT_EQ(run_cli({"simulate", "--config", p("c.ini"), "--pilot", "--seed", "3", "--out", p("sim")}).code, 0);
    const auto cal = run_cli({"calibrate", "--config", p("c.ini"), "--frame", p("sim/pilot_000.pgm"), "--out", p("cal.json")});
    ASSERT_EQ(cal.code, 0) << cal.err;
    EXPECT_NE(cal.out.find("k1 "), std::string::npos);
    EXPECT_NE(cal.out.find("rmse "), std::string::npos);
    const auto j = nlohmann::json::parse(read_file(p("cal.json")));
    EXPECT_NEAR(j["k1"].get<double>(), -2.8335, 0.15);

    // Same inputs, same bytes.
    ASSERT_EQ(run_cli({"calibrate", "--config", p("c.ini"), "--frame", p("sim/pilot_000.pgm"), "--out", p("cal2.json")}).code, 0);
    EXPECT_EQ(read_file(p("cal.json")), read_file(p("cal2.json")));

    ASSERT_EQ(run_cli({"simulate", "--config", p("c.ini"), "--ratio", "0.3", "--seed", "4", "--out", p("sim")}).code, 0);
    const auto dec = run_cli({"decode", "--config", p("c.ini"), "--frame", p("sim/frame_000.pgm"), "--calibration",
                              p("cal.json"), "--truth", p("sim/frame_000.truth.txt"), "--out", p("dec.json")});
    ASSERT_EQ(dec.code, 0) << dec.err;
    const auto d = nlohmann::json::parse(read_file(p("dec.json")));
    EXPECT_EQ(d["ber_hamming"].get<double>(), 0.0);
    EXPECT_EQ(d["den"].get<int>(), 0);

    const auto base = run_cli({"decode", "--config", p("c.ini"), "--frame", p("sim/frame_000.pgm"), "--calibration",
                               p("cal.json"), "--decoder", "baseline", "--out", p("base.json")});
    ASSERT_EQ(base.code, 0) << base.err;
    EXPECT_EQ(nlohmann::json::parse(read_file(p("base.json")))["decoder"], "baseline");
}

TEST_F(Cli, BlankFrameIsCalibrationFailure) {
    write(p("blank.pgm"), encode_pgm(Frame(1280, 1024)));
    const auto r = run_cli({"calibrate", "--preset", "degree2", "--frame", p("blank.pgm"), "--out", p("cal.json")});
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("[detect]"), std::string::npos);
    EXPECT_FALSE(fs::exists(p("cal.json")));
}

TEST_F(Cli, MalformedPgmIsIoError) {
    write(p("bad.pgm"), "P5\n10 10\n255\nshort");
    const auto r = run_cli({"calibrate", "--frame", p("bad.pgm"), "--out", p("cal.json")});
    EXPECT_EQ(r.code, 4);
    EXPECT_NE(r.err.find("PGM"), std::string::npos);
}

TEST_F(Cli, MissingCalibrationIsIoError) {
    write(p("f.pgm"), encode_pgm(Frame(1280, 1024)));
    const auto r = run_cli({"decode", "--frame", p("f.pgm"), "--calibration", p("nope.json"), "--out", p("d.json")});
    EXPECT_EQ(r.code, 4);
}

TEST_F(Cli, SweepWritesCsvAndJsonDeterministically) {
    write(p("s.ini"), "degrees = degree1\nratios = 0.05\nepsilons = 0.04\nframes_per_point = 1\n");
    const auto a = run_cli({"sweep", "--spec", p("s.ini"), "--out", p("a")});
    ASSERT_EQ(a.code, 0) << a.err;
    const auto b = run_cli({"sweep", "--spec", p("s.ini"), "--out", p("b")});
    ASSERT_EQ(b.code, 0) << b.err;
    const std::string csv = read_file(p("a/sweep.csv"));
    EXPECT_EQ(csv, read_file(p("b/sweep.csv")));
    EXPECT_EQ(csv.substr(0, csv.find('\n')), kSweepCsvHeader);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
    EXPECT_TRUE(nlohmann::json::parse(read_file(p("a/sweep.json"))).contains("cells"));
}

TEST_F(Cli, AtomicWriteLeavesNoTempFile) {
    cli::write_file_atomic(dir_ / "x" / "y.txt", "hello");
    EXPECT_EQ(read_file(p("x/y.txt")), "hello");
    EXPECT_FALSE(fs::exists(dir_ / "x" / "y.txt.tmp"));
}
