#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "difftomo/config.hpp"
#include "difftomo/forward.hpp"
#include "difftomo/inverse.hpp"
#include "difftomo/phantom.hpp"

namespace difftomo {

/// Malformed or incompatible file: bad magic, unknown version or dtype,
/// inconsistent dims, truncation, or a manifest that does not match its files.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kArrayVersion = 1;
inline constexpr std::uint32_t kDtypeF64 = 1;
inline constexpr std::size_t kArrayHeaderBytes = 32;
inline constexpr int kManifestVersion = 1;

struct Array {
    std::vector<std::size_t> dims;  // outermost first, 1 to 4 entries, all non-zero
    std::vector<double> values;     // row-major
};

/// Header: "DTOM", u32 version, u32 dtype, u32 ndim, u32 dims[4] (unused = 0),
/// all little-endian; then the values as little-endian f64.
void write_array(const std::filesystem::path& path, std::span<const double> values,
                 std::span<const std::size_t> dims);
Array read_array(const std::filesystem::path& path);
/// Reads only the header and checks the file size against it.
std::vector<std::size_t> read_array_dims(const std::filesystem::path& path);
std::uintmax_t array_file_size(std::span<const std::size_t> dims);

/// (L, ny, nx) phase stack.
void write_stack(const std::filesystem::path& path, const ObjectStack& stack);
ObjectStack read_stack(const std::filesystem::path& path, double pitch, double dz);

/// A measurement directory holds meas.dtom (V, ny, nx) and meta.json with the
/// geometry and orientations. `extra` keys are merged into meta.json.
void save_measurements(const std::filesystem::path& dir, const MeasurementSet& meas,
                       const nlohmann::json& extra = nlohmann::json::object());
MeasurementSet load_measurements(const std::filesystem::path& dir);
nlohmann::json read_meta(const std::filesystem::path& dir);

/// 16-bit grayscale export with [lo, hi] mapped linearly onto 0..65535
/// (values outside are clipped). A sidecar `<path>.json` records the range
/// and the data extent. Throws std::invalid_argument unless lo < hi.
void export_image(const RealMap& map, const std::filesystem::path& path, double lo, double hi);
/// Inverse of export_image using the sidecar range.
RealMap import_image(const std::filesystem::path& path, double pitch);

/// Display range used for phase renders: wide enough for both levels of a
/// {0, etched_phase} layer with some headroom for reconstruction overshoot.
std::pair<double, double> phase_render_range(double etched_phase);

struct DatasetOptions {
    AcquisitionGeometry geometry;
    std::size_t layers = 4;
    std::size_t views = 22;
    double max_tilt_deg = 10.0;
    PatternParams pattern;
    SolverConfig approximant = SolverConfig::approximant_k8();
    std::size_t count = 60;
    DatasetSplits splits;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    bool force = false;
    bool renders = true;  // per-layer PNGs for test-split examples
};

struct ManifestEntry {
    std::string id;
    std::string split;  // "train", "validation" or "test"
    std::uint64_t seed = 0;
    std::string truth, meas, approx, meta;  // relative to the dataset root
};

struct DatasetManifest {
    int format_version = kManifestVersion;
    AcquisitionGeometry geometry;
    std::size_t layers = 0;
    std::size_t views = 0;
    DatasetSplits counts;
    std::vector<ManifestEntry> entries;
    nlohmann::json creation;  // generator settings; no host or time data, so reruns are byte-identical

    nlohmann::json to_json() const;
    static DatasetManifest from_json(const nlohmann::json& j);
};

/// Writes `out_dir`/manifest.json and examples/<id>/{truth,meas,approx}.dtom
/// plus meta.json, and renders/<id>/ for test examples. Examples run in
/// parallel; the manifest is written last. An existing dataset is refused
/// unless options.force is set. On failure everything written is removed.
DatasetManifest generate_dataset(const DatasetOptions& options, const std::filesystem::path& out_dir);

DatasetManifest read_manifest(const std::filesystem::path& dataset_dir);

/// Checks ids are unique, splits match counts, and every referenced file
/// exists and has the dims the geometry implies. Throws FormatError.
DatasetManifest validate_dataset(const std::filesystem::path& dataset_dir);

/// Writes `text` to path via a temporary file and rename.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace difftomo
