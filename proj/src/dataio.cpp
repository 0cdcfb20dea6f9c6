#include "difftomo/dataio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "difftomo/image_io.hpp"
#include "difftomo/parallel.hpp"
#include "difftomo/random.hpp"

namespace difftomo {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'D', 'T', 'O', 'M'};

void put_u32(unsigned char* p, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) p[i] = static_cast<unsigned char>(v >> (8 * i));
}

std::uint32_t get_u32(const unsigned char* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}

std::uint64_t to_little(std::uint64_t v) {
    if constexpr (std::endian::native == std::endian::little) return v;
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xFF) << (8 * (7 - i));
    return r;
}

std::size_t element_count(std::span<const std::size_t> dims) {
    std::size_t n = 1;
    for (std::size_t d : dims) n *= d;
    return n;
}

void check_dims(std::span<const std::size_t> dims) {
    if (dims.empty() || dims.size() > 4) throw std::invalid_argument("array must have 1 to 4 dimensions");
    for (std::size_t d : dims) {
        if (d == 0) throw std::invalid_argument("array dimensions must be non-zero");
        if (d > 0xFFFFFFFFu) throw std::invalid_argument("array dimension exceeds 32 bits");
    }
}

struct Header {
    std::vector<std::size_t> dims;
};

Header parse_header(std::istream& in, const fs::path& path) {
    unsigned char h[kArrayHeaderBytes];
    if (!in.read(reinterpret_cast<char*>(h), sizeof h))
        throw FormatError(path.string() + ": truncated header");
    if (std::memcmp(h, kMagic, 4) != 0) throw FormatError(path.string() + ": not a DTOM array (bad magic)");
    const std::uint32_t version = get_u32(h + 4);
    if (version != kArrayVersion)
        throw FormatError(path.string() + ": unsupported DTOM version " + std::to_string(version));
    const std::uint32_t dtype = get_u32(h + 8);
    if (dtype != kDtypeF64) throw FormatError(path.string() + ": unsupported dtype code " + std::to_string(dtype));
    const std::uint32_t ndim = get_u32(h + 12);
    if (ndim < 1 || ndim > 4) throw FormatError(path.string() + ": bad ndim " + std::to_string(ndim));
    Header out;
    for (std::uint32_t i = 0; i < 4; ++i) {
        const std::uint32_t d = get_u32(h + 16 + 4 * i);
        if (i < ndim && d == 0) throw FormatError(path.string() + ": zero-length dimension");
        if (i >= ndim && d != 0) throw FormatError(path.string() + ": dims beyond ndim must be zero");
        if (i < ndim) out.dims.push_back(d);
    }
    return out;
}

void check_size(const fs::path& path, const std::vector<std::size_t>& dims) {
    const auto actual = fs::file_size(path);
    const auto expected = array_file_size(dims);
    if (actual < expected) throw FormatError(path.string() + ": truncated data");
    if (actual > expected) throw FormatError(path.string() + ": trailing bytes after data");
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    return out;
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text_atomic(path, j.dump(2) + "\n"); }

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

}  // namespace

std::uintmax_t array_file_size(std::span<const std::size_t> dims) {
    return kArrayHeaderBytes + sizeof(double) * element_count(dims);
}

void write_array(const fs::path& path, std::span<const double> values, std::span<const std::size_t> dims) {
    check_dims(dims);
    if (element_count(dims) != values.size()) throw std::invalid_argument("write_array: dims do not match value count");
    for (double v : values)
        if (!std::isfinite(v)) throw std::invalid_argument("write_array: non-finite value");

    unsigned char h[kArrayHeaderBytes] = {};
    std::memcpy(h, kMagic, 4);
    put_u32(h + 4, kArrayVersion);
    put_u32(h + 8, kDtypeF64);
    put_u32(h + 12, static_cast<std::uint32_t>(dims.size()));
    for (std::size_t i = 0; i < dims.size(); ++i) put_u32(h + 16 + 4 * i, static_cast<std::uint32_t>(dims[i]));

    std::ofstream out = open_out(path);
    out.write(reinterpret_cast<const char*>(h), sizeof h);
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
    } else {
        for (double v : values) {
            const std::uint64_t bits = to_little(std::bit_cast<std::uint64_t>(v));
            out.write(reinterpret_cast<const char*>(&bits), 8);
        }
    }
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<std::size_t> read_array_dims(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    Header h = parse_header(in, path);
    check_size(path, h.dims);
    return h.dims;
}

Array read_array(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    Header h = parse_header(in, path);
    check_size(path, h.dims);
    Array a;
    a.dims = h.dims;
    a.values.resize(element_count(h.dims));
    if (!in.read(reinterpret_cast<char*>(a.values.data()), static_cast<std::streamsize>(a.values.size() * 8)))
        throw FormatError(path.string() + ": truncated data");
    if constexpr (std::endian::native != std::endian::little)
        for (double& v : a.values) v = std::bit_cast<double>(to_little(std::bit_cast<std::uint64_t>(v)));
    return a;
}

void write_stack(const fs::path& path, const ObjectStack& stack) {
    const GridSpec& g = stack.grid();
    std::vector<double> flat;
    flat.reserve(stack.layer_count() * g.size());
    for (const auto& layer : stack.phases()) flat.insert(flat.end(), layer.values().begin(), layer.values().end());
    const std::size_t dims[3] = {stack.layer_count(), g.ny, g.nx};
    write_array(path, flat, dims);
}

ObjectStack read_stack(const fs::path& path, double pitch, double dz) {
    Array a = read_array(path);
    if (a.dims.size() != 3) throw FormatError(path.string() + ": expected a (layers, ny, nx) array");
    const GridSpec grid{a.dims[2], a.dims[1], pitch};
    std::vector<RealMap> layers;
    for (std::size_t l = 0; l < a.dims[0]; ++l) {
        RealMap m(grid);
        std::copy_n(a.values.begin() + static_cast<std::ptrdiff_t>(l * grid.size()), grid.size(), m.data());
        layers.push_back(std::move(m));
    }
    return ObjectStack(grid, dz, std::move(layers));
}

void save_measurements(const fs::path& dir, const MeasurementSet& meas, const nlohmann::json& extra) {
    meas.validate();
    fs::create_directories(dir);
    const GridSpec& g = meas.geometry.grid;
    std::vector<double> flat;
    flat.reserve(meas.view_count() * g.size());
    for (const auto& img : meas.images) flat.insert(flat.end(), img.values().begin(), img.values().end());
    const std::size_t dims[3] = {meas.view_count(), g.ny, g.nx};
    write_array(dir / "meas.dtom", flat, dims);

    nlohmann::json meta = extra.is_object() ? extra : nlohmann::json::object();
    meta["format_version"] = kManifestVersion;
    meta["geometry"] = meas.geometry;
    meta["orientations"] = meas.orientations;
    write_json(dir / "meta.json", meta);
}

nlohmann::json read_meta(const fs::path& dir) { return read_json(dir / "meta.json"); }

MeasurementSet load_measurements(const fs::path& dir) {
    const nlohmann::json meta = read_meta(dir);
    if (meta.value("format_version", 0) != kManifestVersion)
        throw FormatError((dir / "meta.json").string() + ": unsupported format_version");
    MeasurementSet m;
    try {
        m.geometry = meta.at("geometry").get<AcquisitionGeometry>();
        m.orientations = meta.at("orientations").get<std::vector<Orientation>>();
    } catch (const std::exception& e) {
        throw FormatError((dir / "meta.json").string() + ": " + e.what());
    }
    const Array a = read_array(dir / "meas.dtom");
    const GridSpec& g = m.geometry.grid;
    if (a.dims.size() != 3 || a.dims[0] != m.orientations.size() || a.dims[1] != g.ny || a.dims[2] != g.nx)
        throw FormatError((dir / "meas.dtom").string() + ": dims do not match meta.json");
    for (std::size_t v = 0; v < a.dims[0]; ++v) {
        RealMap img(g);
        std::copy_n(a.values.begin() + static_cast<std::ptrdiff_t>(v * g.size()), g.size(), img.data());
        m.images.push_back(std::move(img));
    }
    m.validate();
    return m;
}

void export_image(const RealMap& map, const fs::path& path, double lo, double hi) {
    if (!(std::isfinite(lo) && std::isfinite(hi) && lo < hi))
        throw std::invalid_argument("export_image: degenerate display range");
    if (!map.all_finite()) throw std::invalid_argument("export_image: non-finite map");
    const GridSpec& g = map.grid();
    GrayImage img{g.nx, g.ny, 16, std::vector<std::uint16_t>(g.size())};
    double dmin = map[0], dmax = map[0];
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double v = map[i];
        dmin = std::min(dmin, v);
        dmax = std::max(dmax, v);
        const double t = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
        img.pixels[i] = static_cast<std::uint16_t>(std::lround(t * 65535.0));
    }
    write_gray_image(path, img);
    nlohmann::json side = {{"range", {lo, hi}},
                           {"data_min", dmin},
                           {"data_max", dmax},
                           {"bit_depth", 16},
                           {"note", "display range may exceed the data range"}};
    write_json(fs::path(path.string() + ".json"), side);
}

RealMap import_image(const fs::path& path, double pitch) {
    const nlohmann::json side = read_json(fs::path(path.string() + ".json"));
    const double lo = side.at("range").at(0).get<double>(), hi = side.at("range").at(1).get<double>();
    const GrayImage img = read_gray_image(path);
    RealMap out(GridSpec{img.width, img.height, pitch});
    const double full = img.max_value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = lo + (hi - lo) * (img.pixels[i] / full);
    return out;
}

std::pair<double, double> phase_render_range(double etched_phase) {
    const double span = std::abs(etched_phase) > 0 ? std::abs(etched_phase) : 1.0;
    const double lo = std::min(etched_phase, 0.0), hi = std::max(etched_phase, 0.0);
    return {lo - 0.25 * span, hi + 0.25 * span};
}

void write_text_atomic(const fs::path& path, const std::string& text) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out = open_out(tmp);
        out << text;
        out.flush();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw std::runtime_error("write failed for " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Datasets

nlohmann::json DatasetManifest::to_json() const {
    auto entries_json = nlohmann::json::array();
    for (const auto& e : entries)
        entries_json.push_back({{"id", e.id},
                                {"split", e.split},
                                {"seed", e.seed},
                                {"truth", e.truth},
                                {"meas", e.meas},
                                {"approx", e.approx},
                                {"meta", e.meta}});
    return {{"format_version", format_version},
            {"geometry", geometry},
            {"layers", layers},
            {"views", views},
            {"counts", {{"train", counts.train}, {"validation", counts.validation}, {"test", counts.test}}},
            {"examples", entries_json},
            {"creation", creation}};
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json& j) {
    DatasetManifest m;
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != kManifestVersion)
        throw FormatError("unsupported manifest format_version " + std::to_string(m.format_version));
    m.geometry = j.at("geometry").get<AcquisitionGeometry>();
    m.layers = j.at("layers").get<std::size_t>();
    m.views = j.at("views").get<std::size_t>();
    const auto& c = j.at("counts");
    m.counts = {c.at("train").get<std::size_t>(), c.at("validation").get<std::size_t>(),
                c.at("test").get<std::size_t>()};
    for (const auto& e : j.at("examples")) {
        m.entries.push_back({e.at("id").get<std::string>(), e.at("split").get<std::string>(),
                             e.at("seed").get<std::uint64_t>(), e.at("truth").get<std::string>(),
                             e.at("meas").get<std::string>(), e.at("approx").get<std::string>(),
                             e.at("meta").get<std::string>()});
    }
    m.creation = j.value("creation", nlohmann::json::object());
    return m;
}

namespace {

std::string example_id(std::size_t i) {
    std::ostringstream s;
    s << std::setw(5) << std::setfill('0') << i;
    return s.str();
}

const char* split_of(std::size_t i, const DatasetSplits& s) {
    if (i < s.train) return "train";
    if (i < s.train + s.validation) return "validation";
    return "test";
}

const char* const kDatasetParts[] = {"manifest.json", "manifest.json.tmp", "examples", "renders"};

bool has_dataset_parts(const fs::path& dir) {
    for (const char* p : kDatasetParts)
        if (fs::exists(dir / p)) return true;
    return false;
}

void remove_dataset_parts(const fs::path& dir) {
    std::error_code ec;
    for (const char* p : kDatasetParts) fs::remove_all(dir / p, ec);
}

// Writes one example; everything it needs is derived from the example seed.
void write_example(const DatasetOptions& opt, const fs::path& root, const ManifestEntry& entry) {
    const fs::path dir = root / "examples" / entry.id;
    fs::create_directories(dir);

    PatternParams pattern = opt.pattern;
    pattern.seed = derive_seed(entry.seed, 0);
    const ObjectStack truth = synthesize_stack(opt.geometry.grid, opt.layers, opt.geometry.dz, pattern);
    const auto orientations = make_protocol(opt.views, opt.max_tilt_deg);
    const std::uint64_t noise_seed = derive_seed(entry.seed, 1);
    const MeasurementSet meas = simulate_measurements(truth, opt.geometry, orientations, true, noise_seed, 1);

    SolverConfig solver = opt.approximant;
    solver.layers = opt.layers;
    solver.threads = 1;
    solver.record_cost = false;
    const SolverResult approx = approximant(meas, solver);

    write_stack(dir / "truth.dtom", truth);
    write_stack(dir / "approx.dtom", approx.estimate);
    save_measurements(dir, meas,
                      {{"id", entry.id},
                       {"split", entry.split},
                       {"seed", entry.seed},
                       {"pattern_seed", pattern.seed},
                       {"noise_seed", noise_seed},
                       {"layers", opt.layers},
                       {"approximant", solver}});

    if (opt.renders && entry.split == std::string("test")) {
        const fs::path rdir = root / "renders" / entry.id;
        fs::create_directories(rdir);
        const auto [lo, hi] = phase_render_range(opt.pattern.etched_phase);
        for (std::size_t l = 0; l < opt.layers; ++l) {
            const std::string n = std::to_string(l + 1);
            export_image(truth.phase(l), rdir / ("truth_layer" + n + ".png"), lo, hi);
            export_image(approx.estimate.phase(l), rdir / ("approx_layer" + n + ".png"), lo, hi);
        }
    }
}

}  // namespace

DatasetManifest generate_dataset(const DatasetOptions& opt, const fs::path& out_dir) {
    opt.geometry.validate();
    opt.pattern.validate();
    opt.approximant.validate();
    if (opt.layers < 1) throw std::invalid_argument("dataset: layers must be >= 1");
    if (opt.splits.total() != opt.count)
        throw std::invalid_argument("dataset: splits " + std::to_string(opt.splits.train) + "," +
                                    std::to_string(opt.splits.validation) + "," + std::to_string(opt.splits.test) +
                                    " do not sum to count " + std::to_string(opt.count));
    make_protocol(opt.views, opt.max_tilt_deg);  // validates views and tilt range

    const bool existed = fs::exists(out_dir);
    if (existed) {
        if (!fs::is_directory(out_dir)) throw std::invalid_argument(out_dir.string() + " exists and is not a directory");
        if (has_dataset_parts(out_dir)) {
            if (!opt.force)
                throw std::invalid_argument(out_dir.string() + " already holds a dataset; pass --force to overwrite");
            remove_dataset_parts(out_dir);
        }
    }

    DatasetManifest manifest;
    manifest.geometry = opt.geometry;
    manifest.layers = opt.layers;
    manifest.views = opt.views;
    manifest.counts = opt.splits;
    manifest.creation = {{"generator", "difftomo dataset"},
                         {"seed", opt.seed},
                         {"max_tilt_deg", opt.max_tilt_deg},
                         {"pattern", opt.pattern},
                         {"approximant", opt.approximant},
                         {"noise", true}};
    for (std::size_t i = 0; i < opt.count; ++i) {
        ManifestEntry e;
        e.id = example_id(i);
        e.split = split_of(i, opt.splits);
        e.seed = derive_seed(opt.seed, i);
        const std::string base = "examples/" + e.id + "/";
        e.truth = base + "truth.dtom";
        e.meas = base + "meas.dtom";
        e.approx = base + "approx.dtom";
        e.meta = base + "meta.json";
        manifest.entries.push_back(std::move(e));
    }

    try {
        fs::create_directories(out_dir / "examples");
        parallel_for(opt.count, opt.threads, [&](std::size_t i) { write_example(opt, out_dir, manifest.entries[i]); });
        write_text_atomic(out_dir / "manifest.json", manifest.to_json().dump(2) + "\n");
    } catch (...) {
        std::error_code ec;
        if (existed) remove_dataset_parts(out_dir);
        else fs::remove_all(out_dir, ec);
        throw;
    }
    return manifest;
}

DatasetManifest read_manifest(const fs::path& dataset_dir) {
    try {
        return DatasetManifest::from_json(read_json(dataset_dir / "manifest.json"));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError((dataset_dir / "manifest.json").string() + ": " + e.what());
    }
}

DatasetManifest validate_dataset(const fs::path& dataset_dir) {
    DatasetManifest m = read_manifest(dataset_dir);
    const GridSpec& g = m.geometry.grid;
    std::set<std::string> ids;
    DatasetSplits seen{0, 0, 0};
    for (const auto& e : m.entries) {
        if (!ids.insert(e.id).second) throw FormatError("duplicate example id " + e.id);
        if (e.split == "train") ++seen.train;
        else if (e.split == "validation") ++seen.validation;
        else if (e.split == "test") ++seen.test;
        else throw FormatError("example " + e.id + " has unknown split '" + e.split + "'");

        const auto expect = [&](const std::string& rel, std::size_t outer) {
            const fs::path p = dataset_dir / rel;
            if (!fs::exists(p)) throw FormatError("missing file " + p.string());
            const auto dims = read_array_dims(p);
            if (dims != std::vector<std::size_t>{outer, g.ny, g.nx})
                throw FormatError(p.string() + ": dims do not match the manifest geometry");
        };
        expect(e.truth, m.layers);
        expect(e.approx, m.layers);
        expect(e.meas, m.views);
        if (!fs::exists(dataset_dir / e.meta)) throw FormatError("missing file " + (dataset_dir / e.meta).string());
    }
    if (seen.train != m.counts.train || seen.validation != m.counts.validation || seen.test != m.counts.test)
        throw FormatError("split counts in manifest do not match its examples");
    return m;
}

}  // namespace difftomo
