#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "difftomo/config.hpp"

using namespace difftomo;
using nlohmann::json;

TEST_CASE("defaults describe the desk-scale setup") {
    const RunConfig c;
    CHECK_NOTHROW(c.validate());
    CHECK(c.geometry.grid.nx == 128);
    CHECK(c.geometry.grid.pitch == 16e-6);
    CHECK(c.geometry.wavelength == 632.8e-9);
    CHECK(c.geometry.d_defocus == 58e-3);
    CHECK(c.geometry.dz == 0.5e-3);
    CHECK(c.geometry.n_medium == 1.42875);
    CHECK(c.geometry.photon_flux == 1e3);
    CHECK(c.geometry.read_sigma == 13.0);
    CHECK(c.layers == 4);
    CHECK(c.views == 22);
    CHECK(c.pattern.etched_phase == -0.33);
    CHECK(c.dataset_count == 60);
}

TEST_CASE("run config round-trips through JSON") {
    RunConfig c;
    c.geometry.grid = {64, 48, 8e-6};
    c.geometry.read_mean = 12.0;
    c.layers = 3;
    c.views = 6;
    c.lt.iterations = 7;
    c.lt.momentum = false;
    c.pattern.seed = 5;
    c.dataset_count = 12;
    c.splits = {8, 2, 2};
    c.seed = 99;
    const json j = c;
    const RunConfig back = j.get<RunConfig>();
    CHECK(json(back) == j);
    CHECK(back.geometry.grid.ny == 48);
    CHECK(back.lt.iterations == 7);
    CHECK_FALSE(back.lt.momentum);
    CHECK(back.lt.layers == 3);
    CHECK(back.approximant.layers == 3);
}

TEST_CASE("partial configs keep defaults and unknown keys fail") {
    RunConfig c = json::parse(R"({"geometry": {"grid": {"nx": 32}}, "lt": {"step": 0.02}})").get<RunConfig>();
    CHECK(c.geometry.grid.nx == 32);
    CHECK(c.geometry.grid.ny == 128);
    CHECK(c.lt.step == 0.02);
    CHECK(c.lt.iterations == 30);

    CHECK_THROWS_AS(json::parse(R"({"layer": 4})").get<RunConfig>(), std::invalid_argument);
    CHECK_THROWS_AS(json::parse(R"({"geometry": {"wavelenght": 1e-6}})").get<RunConfig>(), std::invalid_argument);
    CHECK_THROWS_AS(json::parse(R"({"lt": {"itertions": 3}})").get<RunConfig>(), std::invalid_argument);
    CHECK_THROWS_AS(json::parse(R"({"dataset": {"cnt": 3}})").get<RunConfig>(), std::invalid_argument);
    CHECK_THROWS_AS(json::parse(R"([1, 2])").get<RunConfig>(), std::invalid_argument);
}

TEST_CASE("dataset splits") {
    const auto s = DatasetSplits::for_count(60);
    CHECK(s.train == 50);
    CHECK(s.validation == 5);
    CHECK(s.test == 5);
    CHECK(DatasetSplits::for_count(0).total() == 0);
    CHECK(DatasetSplits::for_count(7).total() == 7);
    CHECK(DatasetSplits::for_count(7).train == 7);

    const RunConfig c = json::parse(R"({"dataset": {"count": 24}})").get<RunConfig>();
    CHECK(c.splits.train == 20);
    CHECK(c.splits.test == 2);
    CHECK_NOTHROW(c.validate());

    RunConfig bad;
    bad.splits = {50, 5, 6};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = {};
    bad.views = 21;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = {};
    bad.max_tilt_deg = 30.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("config files") {
    const auto dir = std::filesystem::path(DIFFTOMO_TEST_TMP) / "config";
    std::filesystem::create_directories(dir);
    {
        std::ofstream(dir / "ok.json") << R"({"layers": 2, "seed": 3})";
        std::ofstream(dir / "broken.json") << R"({"layers": )";
    }
    const RunConfig c = load_run_config(dir / "ok.json");
    CHECK(c.layers == 2);
    CHECK(c.seed == 3);
    CHECK_THROWS_AS(load_run_config(dir / "broken.json"), std::invalid_argument);
    CHECK_THROWS_AS(load_run_config(dir / "missing.json"), std::invalid_argument);
}
