#include <gtest/gtest.h>

#include <filesystem>

#include <fockmetro/io.hpp>
#include <fockmetro/lossmap.hpp>

using namespace fockmetro;

TEST(Io, Fmt17RoundTrips) {
    for (double x : {0.1, 1.0 / 3, 9216.0, -2.5e-300, pi}) EXPECT_EQ(std::stod(fmt17(x)), x);
    EXPECT_EQ(fmt17(0.5), "0.5");
}

TEST(Io, StateJsonRoundTrip) {
    const auto s = optimal_state({5, 3.3, Encoding::linear, 0.4, 1.2});
    const json j = json::parse(state_to_json(s).dump());
    EXPECT_EQ(j.at("kets").size(), 3u);
    EXPECT_NEAR(j.at("norm").get<double>(), 1.0, 1e-14);
    const auto t = state_from_json(j);
    for (std::size_t k = 0; k < s.amp.size(); ++k) EXPECT_EQ(s.amp[k], t.amp[k]);
    json bad = j;
    bad["kets"][0]["i"] = 7;
    EXPECT_THROW(state_from_json(bad), validation_error);
}

TEST(Io, DensityJsonRoundTrip) {
    const auto r = apply_loss(optimal_state({3, 2.0, Encoding::nonlinear, 0, 0, 0, 0.3}), LossChannel(0.7, 0.9));
    const auto back = density_from_json(json::parse(density_to_json(r).dump()));
    EXPECT_EQ((r.m - back.m).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Io, ManifestRoundTrip) {
    RunManifest m;
    m.command = "adapt";
    m.parameters = {{"N", 10}, {"nbar", 8.0}, {"objective", "sharpness"}};
    m.seed = 123456789012345ull;
    m.timestamp = utc_now();
    const auto back = RunManifest::from_json(json::parse(m.to_json().dump()));
    EXPECT_TRUE(back == m);
    EXPECT_EQ(back.tool_version, kToolVersion);
    EXPECT_EQ(m.timestamp.size(), 20u);
}

TEST(Io, CsvLayout) {
    Csv c({"a", "b", "c"});
    c.cell(1).cell(0.25).cell("x");
    c.cell(2).cell(1.0 / 3).cell(std::string("y"));
    EXPECT_EQ(c.str(), "a,b,c\n1,0.25,x\n2,0.33333333333333331,y\n");
}

TEST(Io, TextFiles) {
    const auto path = (std::filesystem::temp_directory_path() / "fockmetro_io_test.txt").string();
    write_text(path, "hello\n");
    EXPECT_EQ(read_text(path), "hello\n");
    std::filesystem::remove(path);
    EXPECT_THROW(read_text(path), validation_error);
}

TEST(Lossmap, AxisAndRegions) {
    const auto ax = transmission_axis(5);
    EXPECT_EQ(ax.front(), 0.0);
    EXPECT_EQ(ax.back(), 1.0);
    EXPECT_EQ(classify_region(10, 5, 9), Region::opt_beats_lossless_noon);
    EXPECT_EQ(classify_region(8, 5, 9), Region::opt_beats_lossy_noon);
    EXPECT_EQ(classify_region(4, 5, 9), Region::noon_wins);
    EXPECT_THROW(noon_photons(2.5), validation_error);
    const auto rows = lossmap({4, 2.0, Encoding::linear}, 3);
    ASSERT_EQ(rows.size(), 9u);
    EXPECT_EQ(rows[1].T1, 0.0);
    EXPECT_EQ(rows[1].T2, 0.5);
    // lossless corner: nbar N = 8 for the optimal state, 4 for NOON with 2 photons
    EXPECT_NEAR(rows.back().F_opt_loss, 8.0, 1e-9);
    EXPECT_NEAR(rows.back().F_noon_loss, 4.0, 1e-9);
}

TEST(Lossmap, RobustnessIsMonotoneInThreshold) {
    const auto rows = robustness(3, Encoding::linear, {1.5, 3.0}, {0.2, 0.5, 0.9}, 6);
    ASSERT_EQ(rows.size(), 6u);
    for (int b = 0; b < 2; ++b) {
        EXPECT_GE(rows[3 * b].proportion, rows[3 * b + 1].proportion);
        EXPECT_GE(rows[3 * b + 1].proportion, rows[3 * b + 2].proportion);
        EXPECT_GT(rows[3 * b + 2].proportion, 0.0);  // T = 1 always passes
    }
    const auto ax = nbar_axis(3, 0.5);
    EXPECT_EQ(ax.size(), 11u);
    EXPECT_EQ(ax.back(), 5.5);
}
