#include <gtest/gtest.h>

#include <cmath>

#include "ledvlc/calibrate.hpp"
#include "ledvlc/config.hpp"
#include "ledvlc/rng.hpp"
#include "oracles.hpp"

using namespace ledvlc;

namespace {

// 36 pilots on a 66 px lattice, observed through the oracle forward model.
std::vector<PilotCorrespondence> synthetic_pilots(double k1, double k2, double jitter_rms, std::uint64_t seed) {
    const IdealGrid g = IdealGrid::centered({643.3, 509.9}, 22.0, 16);
    Rng rng(seed);
    const double sigma = jitter_rms / std::sqrt(2.0);
    std::vector<PilotCorrespondence> out;
    for (const auto& idx : pilot_pattern(16, 3).active()) {
        const Point2 p = g.point(idx);
        const auto o = oracle::distort({p.x, p.y}, 640, 512, 3000, k1, k2, 0.0);
        out.push_back({idx, {o.x + sigma * rng.normal(), o.y + sigma * rng.normal()}, p});
    }
    return out;
}

}  // namespace

TEST(FitDistortion, NoiselessRecoversCoefficients) {
    const auto corrs = synthetic_pilots(-2.8335, 2.1234, 0.0, 1);
    const CameraModel base;
    const auto fit = fit_distortion(corrs, base, 2);
    EXPECT_NEAR(fit.params.k1, -2.8335, 1e-6 * 2.8335);
    EXPECT_NEAR(fit.params.k2, 2.1234, 1e-6 * 2.1234);
    CameraModel fitted = base;
    fitted.distortion = fit.params;
    EXPECT_LT(fit_residual(corrs, fitted).rmse, 1e-6);
}

TEST(FitDistortion, JitteredRmseNearOnePixelAndNested) {
    const CameraModel base;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const auto corrs = synthetic_pilots(-2.8335, 2.1234, 1.0, seed);
        CameraModel c1 = base, c2 = base;
        c1.distortion = fit_distortion(corrs, base, 1).params;
        c2.distortion = fit_distortion(corrs, base, 2).params;
        const double r1 = fit_residual(corrs, c1).rmse;
        const double r2 = fit_residual(corrs, c2).rmse;
        EXPECT_LE(r2, r1 + 1e-12) << "seed " << seed;
        EXPECT_GE(r2, 0.7) << "seed " << seed;
        EXPECT_LE(r2, 1.4) << "seed " << seed;
    }
}

TEST(FitDistortion, RmseDecomposition) {
    const auto corrs = synthetic_pilots(-2.8, 0.0, 1.0, 4);
    CameraModel c;
    c.distortion = fit_distortion(corrs, c, 1).params;
    const auto r = fit_residual(corrs, c);
    EXPECT_NEAR(r.rmse * r.rmse, r.rmse_x * r.rmse_x + r.rmse_y * r.rmse_y, 1e-12);
}

TEST(FitDistortion, TooFewPointsIsIllConditioned) {
    auto corrs = synthetic_pilots(-2.8, 0.0, 0.0, 1);
    corrs.resize(3);
    try {
        fit_distortion(corrs, CameraModel{}, 2);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::IllConditionedFit);
    }
}

TEST(FitDistortion, PointsAtPrincipalPointCarryNoInformation) {
    std::vector<PilotCorrespondence> corrs(6, PilotCorrespondence{{0, 0}, {640, 512}, {640, 512}});
    EXPECT_THROW(fit_distortion(corrs, CameraModel{}, 1), Error);
}

TEST(FitDistortion, BoundedClampsWildCoefficients) {
    const auto corrs = synthetic_pilots(-40.0, 0.0, 0.0, 1);
    const auto fit = fit_distortion(corrs, CameraModel{}, 1, true);
    EXPECT_TRUE(fit.clamped);
    EXPECT_TRUE(fit.params.within_bounds());
}

TEST(EstimateGrid, ConstructedLattice) {
    std::vector<Point2> pts;
    for (int j = 0; j < 6; ++j)
        for (int i = 0; i < 6; ++i) pts.push_back({300.0 + 66.0 * i, 200.0 + 66.0 * j});
    const auto g = estimate_grid(pts, 16, 3);
    EXPECT_NEAR(g.width, 330.0, 1e-9);
    EXPECT_NEAR(g.delta_a, 22.0, 1e-9);
    EXPECT_NEAR(g.delta_b, 22.0, 1e-9);
    EXPECT_EQ(g.bottom_left, (Point2{300.0, 200.0}));
    EXPECT_EQ(g.top_right, (Point2{630.0, 530.0}));
    EXPECT_EQ(g.grid.origin, g.bottom_left);
}

TEST(EstimateGrid, AmbiguousCorners) {
    const std::vector<Point2> diamond{{0, 10}, {10, 0}, {0, -10}, {-10, 0}};
    const std::vector<Point2> shared{{10, 10}, {9, 9}, {-9, -9}, {-10, -10}};
    for (const auto& pts : {diamond, shared}) {
        try {
            estimate_grid(pts, 16, 3);
            ADD_FAILURE();
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::AmbiguousCorner);
        }
    }
}

TEST(LatticeGrid, RecoversOriginFromPartialLattice) {
    std::vector<PilotCorrespondence> corrs;
    std::vector<Point2> rect;
    for (int j = 3; j < 16; j += 3)
        for (int i = 0; i < 13; i += 3) {
            const Point2 p{100.0 + 22.0 * i, 50.0 + 22.0 * j};
            corrs.push_back({{i, j}, p, p});
            rect.push_back(p);
        }
    const auto g = lattice_grid(corrs, rect, 22.0, 16);
    EXPECT_NEAR(g.grid.origin.x, 100.0, 1e-9);
    EXPECT_NEAR(g.grid.origin.y, 50.0, 1e-9);
    EXPECT_NEAR(g.delta_a, 22.0, 1e-12);
}

TEST(IdealPilotGrid, AnchoredOnReference) {
    const auto grid = ideal_pilot_grid({6, 6}, {640, 512}, 22.0, pilot_pattern(16, 3));
    ASSERT_EQ(grid.size(), 36u);
    for (const auto& [idx, p] : grid) {
        EXPECT_DOUBLE_EQ(p.x, 640 + 22.0 * (idx.i - 6));
        EXPECT_DOUBLE_EQ(p.y, 512 + 22.0 * (idx.j - 6));
    }
    EXPECT_THROW(ideal_pilot_grid({0, 0}, {0, 0}, 0.0, pilot_pattern(16, 3)), Error);
}

TEST(MatchPilots, TooFewMatchesFails) {
    const IdealGrid nominal = IdealGrid::centered({640, 512}, 66.0, 6);
    std::vector<Circle> cands;
    for (int k = 0; k < 10; ++k) cands.push_back({nominal.point(k % 6, k / 6).x, nominal.point(k % 6, k / 6).y, 27, 1});
    try {
        match_pilots(cands, IdealGrid{nominal.origin, 22.0, 22.0, 16}, pilot_pattern(16, 3), 3);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::CalibrationFailure);
    }
}

TEST(CalibrationPipeline, NoDistortionLowRmse) {
    Scene s = preset_degree(2);
    s.camera.distortion = {};
    const auto rep = s.calibrate(3);
    EXPECT_LT(rep.rmse, 0.2);
    EXPECT_EQ(rep.pilots_matched, 36);
    EXPECT_NEAR(std::abs(rep.k.k1), 0.0, 0.2);
}

TEST(CalibrationPipeline, RecoversInjectedDistortionAndGrid) {
    for (int d = 1; d <= 3; ++d) {
        const Scene s = preset_degree(d);
        const auto rep = s.calibrate(5);
        EXPECT_NEAR(rep.k.k1, s.camera.distortion.k1, 0.05 * std::abs(s.camera.distortion.k1)) << "degree " << d;
        EXPECT_LT(rep.rmse, 0.2) << "degree " << d;
        EXPECT_NEAR(rep.grid.delta_a, s.delta_px, 0.1) << "degree " << d;
        const Point2 truth_origin = s.truth_grid().origin;
        EXPECT_LT(distance(rep.grid.grid.origin, truth_origin), 0.5) << "degree " << d;
        EXPECT_EQ(rep.c_exp, s.calibration.c_exp_override);
    }
}

TEST(CalibrationPipeline, RmseCountsOnlyPilots) {
    const auto rep = preset_degree(2).calibrate(1);
    EXPECT_EQ(rep.pilots.size(), static_cast<std::size_t>(rep.pilots_matched));
    EXPECT_LE(rep.pilots_matched, 36);
}

TEST(CalibrationPipeline, BlankFrameFailsInDetect) {
    const Scene s = preset_degree(2);
    try {
        calibrate_pilot_frame(Frame(1280, 1024), s.receiver_camera(), s.geometry, s.calibration);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::CalibrationFailure);
        EXPECT_EQ(e.stage(), "detect");
    }
}

TEST(CalibrationPipeline, ToleratesVignettedCorners) {
    Scene s = preset_degree(1);
    s.flags.apply_vignetting = true;
    s.noise.sigma = 0.02;
    const auto rep = s.calibrate(5);
    EXPECT_LT(rep.pilots_matched, 36);
    EXPECT_NEAR(rep.k.k1, s.camera.distortion.k1, 0.1 * std::abs(s.camera.distortion.k1));
    EXPECT_LT(distance(rep.grid.grid.origin, s.truth_grid().origin), 1.0);
}

TEST(CalibrationReport, JsonRoundTrip) {
    const auto rep = preset_degree(2).calibrate(2);
    const auto back = calibration_from_json(to_json(rep));
    EXPECT_EQ(back.k.k1, rep.k.k1);
    EXPECT_EQ(back.k.k2, rep.k.k2);
    EXPECT_EQ(back.grid.grid.origin, rep.grid.grid.origin);
    EXPECT_EQ(back.grid.delta_a, rep.grid.delta_a);
    EXPECT_EQ(back.c_exp, rep.c_exp);
    EXPECT_EQ(back.pilots.size(), rep.pilots.size());
    EXPECT_EQ(to_json(back).dump(), to_json(rep).dump());
}

TEST(CalibrationReport, MalformedJsonRejected) {
    try {
        calibration_from_json(nlohmann::json{{"k1", 1.0}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Parse);
    }
}

TEST(CalibrationConfig, Validation) {
    CalibrationConfig c;
    c.model_order = 4;
    EXPECT_THROW(c.validate(), Error);
    CalibrationConfig d;
    d.pilot_band = 1.0;
    EXPECT_THROW(d.validate(), Error);
}
