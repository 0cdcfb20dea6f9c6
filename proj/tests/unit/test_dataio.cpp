#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "difftomo/dataio.hpp"
#include "difftomo/image_io.hpp"
#include "oracles.hpp"

using namespace difftomo;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::path(DIFFTOMO_TEST_TMP) / "dataio" / name;
    fs::remove_all(p);
    fs::create_directories(p.parent_path());
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << bytes;
}

// Snapshot of every regular file below root, keyed by relative path.
std::map<std::string, std::string> tree(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = slurp(e.path());
    return out;
}

DatasetOptions tiny_dataset() {
    DatasetOptions o;
    o.geometry.grid = {16, 16, 16e-6};
    o.layers = 2;
    o.views = 4;
    o.pattern.min_width = o.pattern.min_length = 48e-6;
    o.pattern.max_width = 64e-6;
    o.pattern.max_length = 128e-6;
    o.approximant.iterations = 2;
    o.count = 4;
    o.splits = {2, 1, 1};
    o.seed = 11;
    return o;
}

}  // namespace

TEST_CASE("arrays round-trip bit-exactly") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n;
    std::vector<double> v(3 * 5 * 7);
    for (double& x : v) x = n(rng);
    v[0] = -0.0;
    v[1] = 1e-310;  // subnormal
    v[2] = std::numeric_limits<double>::max();
    const fs::path p = scratch("a.dtom");
    const std::vector<std::size_t> dims{3, 5, 7};
    write_array(p, v, dims);
    CHECK(fs::file_size(p) == array_file_size(dims));
    CHECK(fs::file_size(p) == 32 + 8 * v.size());
    const Array a = read_array(p);
    CHECK(a.dims == dims);
    CHECK(std::memcmp(a.values.data(), v.data(), v.size() * sizeof(double)) == 0);
    CHECK(read_array_dims(p) == dims);

    const std::string bytes = slurp(p);
    CHECK(bytes.substr(0, 4) == "DTOM");
    CHECK(static_cast<unsigned char>(bytes[4]) == 1);   // version, little-endian
    CHECK(static_cast<unsigned char>(bytes[8]) == 1);   // dtype f64
    CHECK(static_cast<unsigned char>(bytes[12]) == 3);  // ndim
    CHECK(static_cast<unsigned char>(bytes[16]) == 3);
    CHECK(static_cast<unsigned char>(bytes[20]) == 5);
    CHECK(static_cast<unsigned char>(bytes[24]) == 7);
    CHECK(bytes.substr(28, 4) == std::string(4, '\0'));

    const std::vector<std::size_t> desk{4, 128, 128};
    CHECK(array_file_size(desk) == 32u + 8u * 65536u);
}

TEST_CASE("array writer rejects bad input") {
    const fs::path p = scratch("bad.dtom");
    const std::vector<double> v{1, 2, 3, 4};
    CHECK_THROWS_AS(write_array(p, v, std::vector<std::size_t>{}), std::invalid_argument);
    CHECK_THROWS_AS(write_array(p, v, std::vector<std::size_t>{1, 1, 1, 1, 4}), std::invalid_argument);
    CHECK_THROWS_AS(write_array(p, v, std::vector<std::size_t>{0, 4}), std::invalid_argument);
    CHECK_THROWS_AS(write_array(p, v, std::vector<std::size_t>{3}), std::invalid_argument);
    CHECK_THROWS_AS(write_array(p, std::vector<double>{1, std::nan("")}, std::vector<std::size_t>{2}),
                    std::invalid_argument);
    CHECK_FALSE(fs::exists(p));
}

TEST_CASE("array reader rejects malformed files") {
    const fs::path good = scratch("good.dtom");
    write_array(good, std::vector<double>{1, 2, 3, 4, 5, 6}, std::vector<std::size_t>{2, 3});
    const std::string bytes = slurp(good);
    const fs::path p = scratch("mangled.dtom");

    auto corrupt = [&](std::size_t offset, char value) {
        std::string b = bytes;
        b[offset] = value;
        spit(p, b);
    };
    corrupt(0, 'X');
    CHECK_THROWS_AS(read_array(p), FormatError);
    corrupt(4, 2);
    CHECK_THROWS_AS(read_array(p), FormatError);
    corrupt(8, 2);
    CHECK_THROWS_AS(read_array(p), FormatError);
    corrupt(12, 0);
    CHECK_THROWS_AS(read_array(p), FormatError);
    corrupt(12, 5);
    CHECK_THROWS_AS(read_array(p), FormatError);
    corrupt(16, 0);
    CHECK_THROWS_AS(read_array(p), FormatError);
    corrupt(24, 1);  // dim beyond ndim
    CHECK_THROWS_AS(read_array(p), FormatError);

    spit(p, bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_AS(read_array(p), FormatError);
    CHECK_THROWS_AS(read_array_dims(p), FormatError);
    spit(p, bytes + "x");
    CHECK_THROWS_AS(read_array(p), FormatError);
    spit(p, bytes.substr(0, 10));
    CHECK_THROWS_AS(read_array(p), FormatError);
    CHECK_THROWS_AS(read_array(scratch("absent.dtom")), FormatError);
}

TEST_CASE("stacks and measurement sets round-trip") {
    std::mt19937_64 rng(5);
    const GridSpec g{12, 8, 16e-6};
    std::vector<RealMap> layers;
    for (int l = 0; l < 3; ++l) layers.push_back(oracle::random_map(g, rng));
    const ObjectStack s(g, 0.5e-3, layers);
    const fs::path p = scratch("stack.dtom");
    write_stack(p, s);
    CHECK(read_array_dims(p) == std::vector<std::size_t>{3, 8, 12});
    const ObjectStack back = read_stack(p, g.pitch, 0.5e-3);
    for (int l = 0; l < 3; ++l)
        CHECK(std::equal(back.phase(l).values().begin(), back.phase(l).values().end(), s.phase(l).values().begin()));
    CHECK_THROWS_AS(read_stack(p, 0.0, 0.5e-3), std::invalid_argument);

    AcquisitionGeometry geom;
    geom.grid = g;
    geom.read_mean = 3.0;
    const MeasurementSet m = simulate_measurements(s, geom, make_protocol(4, 8.0), true, 9, 1);
    const fs::path dir = scratch("meas");
    save_measurements(dir, m, {{"note", "hello"}});
    const MeasurementSet m2 = load_measurements(dir);
    CHECK(m2.geometry.read_mean == 3.0);
    CHECK(m2.geometry.grid.nx == 12);
    CHECK(m2.orientations == m.orientations);
    for (std::size_t v = 0; v < 4; ++v)
        CHECK(std::equal(m2.images[v].values().begin(), m2.images[v].values().end(), m.images[v].values().begin()));
    CHECK(read_meta(dir)["note"] == "hello");

    // meta.json and meas.dtom must agree.
    write_array(dir / "meas.dtom", std::vector<double>(3 * 8 * 12, 1.0), std::vector<std::size_t>{3, 8, 12});
    CHECK_THROWS_AS(load_measurements(dir), FormatError);
}

TEST_CASE("16-bit image export") {
    const GridSpec g{6, 4, 16e-6};
    const fs::path p = scratch("img.png");

    SUBCASE("constant map centred in the range is mid-gray") {
        export_image(RealMap(g, 0.2), p, -0.8, 1.2);
        const GrayImage img = read_gray_image(p);
        CHECK(img.bit_depth == 16);
        for (auto v : img.pixels) CHECK(v == 32768);
        const auto side = nlohmann::json::parse(slurp(fs::path(p.string() + ".json")));
        CHECK(side["range"][0] == -0.8);
        CHECK(side["data_min"] == 0.2);
        CHECK(side["data_max"] == 0.2);
    }
    SUBCASE("two-valued map gives two gray levels") {
        RealMap m(g, 0.0);
        for (std::size_t i = 0; i < m.size(); i += 3) m[i] = -0.33;
        const auto [lo, hi] = phase_render_range(-0.33);
        CHECK(lo < -0.33);
        CHECK(hi > 0.0);
        export_image(m, p, lo, hi);
        const GrayImage img = read_gray_image(p);
        std::set<std::uint16_t> levels(img.pixels.begin(), img.pixels.end());
        CHECK(levels.size() == 2);
        CHECK(*levels.begin() > 0);
        CHECK(*levels.rbegin() < 65535);
    }
    SUBCASE("quantization error is within one step") {
        std::mt19937_64 rng(2);
        const RealMap m = oracle::random_map(g, rng, 0.5);
        export_image(m, p, -3.0, 3.0);
        const RealMap back = import_image(p, g.pitch);
        for (std::size_t i = 0; i < m.size(); ++i) CHECK(std::abs(back[i] - m[i]) <= 6.0 / 65535.0 / 2.0 + 1e-15);
    }
    SUBCASE("values outside the range clip") {
        RealMap m(g, 0.0);
        m[0] = 10.0;
        m[1] = -10.0;
        export_image(m, p, -1.0, 1.0);
        const GrayImage img = read_gray_image(p);
        CHECK(img.pixels[0] == 65535);
        CHECK(img.pixels[1] == 0);
    }
    CHECK_THROWS_AS(export_image(RealMap(g), p, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(export_image(RealMap(g), p, 1.0, -1.0), std::invalid_argument);
}

TEST_CASE("empty dataset") {
    DatasetOptions o = tiny_dataset();
    o.count = 0;
    o.splits = {0, 0, 0};
    const fs::path dir = scratch("ds_empty");
    const auto m = generate_dataset(o, dir);
    CHECK(m.entries.empty());
    const auto v = validate_dataset(dir);
    CHECK(v.entries.empty());
    CHECK(v.layers == 2);
}

TEST_CASE("dataset generation is deterministic and validates") {
    const fs::path a = scratch("ds_a"), b = scratch("ds_b");
    DatasetOptions o = tiny_dataset();
    o.threads = 1;
    generate_dataset(o, a);
    o.threads = 3;
    generate_dataset(o, b);
    const auto ta = tree(a), tb = tree(b);
    CHECK(ta.size() == tb.size());
    CHECK(ta == tb);

    const DatasetManifest m = validate_dataset(a);
    REQUIRE(m.entries.size() == 4);
    CHECK(m.entries[0].id == "00000");
    CHECK(m.entries[0].split == "train");
    CHECK(m.entries[2].split == "validation");
    CHECK(m.entries[3].split == "test");
    CHECK(m.entries[3].truth == "examples/00003/truth.dtom");
    CHECK(fs::exists(a / "renders" / "00003" / "truth_layer2.png"));
    CHECK(fs::exists(a / "renders" / "00003" / "approx_layer1.png"));
    CHECK_FALSE(fs::exists(a / "renders" / "00000"));
    CHECK(m.entries[0].seed != m.entries[1].seed);

    const ObjectStack t0 = read_stack(a / m.entries[0].truth, 16e-6, m.geometry.dz);
    const ObjectStack t1 = read_stack(a / m.entries[1].truth, 16e-6, m.geometry.dz);
    CHECK_FALSE(std::equal(t0.phase(0).values().begin(), t0.phase(0).values().end(), t1.phase(0).values().begin()));

    SUBCASE("a changed seed changes the data") {
        const fs::path c = scratch("ds_c");
        o.seed = 12;
        generate_dataset(o, c);
        CHECK(tree(c) != ta);
    }
    SUBCASE("validation catches damage") {
        fs::remove(a / m.entries[1].approx);
        CHECK_THROWS_AS(validate_dataset(a), FormatError);
    }
    SUBCASE("validation catches wrong dims") {
        write_array(a / m.entries[2].truth, std::vector<double>(16 * 16, 0.0), std::vector<std::size_t>{1, 16, 16});
        CHECK_THROWS_AS(validate_dataset(a), FormatError);
    }
}

TEST_CASE("existing datasets are kept unless forced") {
    const fs::path dir = scratch("ds_force");
    DatasetOptions o = tiny_dataset();
    generate_dataset(o, dir);
    spit(dir / "notes.txt", "keep me");
    const auto before = tree(dir);
    CHECK_THROWS_AS(generate_dataset(o, dir), std::invalid_argument);
    CHECK(tree(dir) == before);

    o.force = true;
    o.count = 2;
    o.splits = {1, 0, 1};
    generate_dataset(o, dir);
    const auto m = validate_dataset(dir);
    CHECK(m.entries.size() == 2);
    CHECK_FALSE(fs::exists(dir / "examples" / "00002"));
    CHECK(slurp(dir / "notes.txt") == "keep me");
}

TEST_CASE("failed generation leaves nothing behind") {
    DatasetOptions o = tiny_dataset();
    o.pattern.min_width = o.pattern.max_width = 1e-3;  // wider than the 256 um field: fails inside the workers
    const fs::path fresh = scratch("ds_fail_new");
    CHECK_THROWS(generate_dataset(o, fresh));
    CHECK_FALSE(fs::exists(fresh));

    const fs::path kept = scratch("ds_fail_existing");
    fs::create_directories(kept);
    spit(kept / "readme.txt", "x");
    CHECK_THROWS(generate_dataset(o, kept));
    CHECK(fs::exists(kept / "readme.txt"));
    CHECK_FALSE(fs::exists(kept / "examples"));
    CHECK_FALSE(fs::exists(kept / "manifest.json"));

    o = tiny_dataset();
    o.splits = {1, 1, 1};
    CHECK_THROWS_AS(generate_dataset(o, scratch("ds_bad_split")), std::invalid_argument);
    CHECK_FALSE(fs::exists(scratch("ds_bad_split")));
}

TEST_CASE("manifest json round-trips") {
    const fs::path dir = scratch("ds_json");
    const DatasetManifest m = generate_dataset(tiny_dataset(), dir);
    const DatasetManifest r = DatasetManifest::from_json(m.to_json());
    CHECK(r.to_json() == m.to_json());
    auto j = m.to_json();
    j["format_version"] = 99;
    CHECK_THROWS_AS(DatasetManifest::from_json(j), FormatError);
    spit(dir / "manifest.json", "{ not json");
    CHECK_THROWS_AS(read_manifest(dir), FormatError);
}
