#include "difftomo/config.hpp"

#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string>

namespace difftomo {

namespace {

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known, const char* where) {
    if (!j.is_object()) throw std::invalid_argument(std::string(where) + ": expected a JSON object");
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw std::invalid_argument(std::string(where) + ": unknown key '" + key + "'");
    }
}

template <class T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
    if (auto it = j.find(key); it != j.end()) it->get_to(out);
}

}  // namespace

void to_json(nlohmann::json& j, const GridSpec& g) { j = {{"nx", g.nx}, {"ny", g.ny}, {"pitch", g.pitch}}; }

void from_json(const nlohmann::json& j, GridSpec& g) {
    reject_unknown(j, {"nx", "ny", "pitch"}, "grid");
    read_opt(j, "nx", g.nx);
    read_opt(j, "ny", g.ny);
    read_opt(j, "pitch", g.pitch);
}

void to_json(nlohmann::json& j, const AcquisitionGeometry& g) {
    j = {{"grid", g.grid},
         {"wavelength", g.wavelength},
         {"n_medium", g.n_medium},
         {"n_detector", g.n_detector},
         {"d_defocus", g.d_defocus},
         {"dz", g.dz},
         {"photon_flux", g.photon_flux},
         {"read_sigma", g.read_sigma},
         {"read_mean", g.read_mean},
         {"clip_negative", g.clip_negative},
         {"max_tilt_deg", g.max_tilt_deg}};
}

void from_json(const nlohmann::json& j, AcquisitionGeometry& g) {
    reject_unknown(j,
                   {"grid", "wavelength", "n_medium", "n_detector", "d_defocus", "dz", "photon_flux", "read_sigma",
                    "read_mean", "clip_negative", "max_tilt_deg"},
                   "geometry");
    read_opt(j, "grid", g.grid);
    read_opt(j, "wavelength", g.wavelength);
    read_opt(j, "n_medium", g.n_medium);
    read_opt(j, "n_detector", g.n_detector);
    read_opt(j, "d_defocus", g.d_defocus);
    read_opt(j, "dz", g.dz);
    read_opt(j, "photon_flux", g.photon_flux);
    read_opt(j, "read_sigma", g.read_sigma);
    read_opt(j, "read_mean", g.read_mean);
    read_opt(j, "clip_negative", g.clip_negative);
    read_opt(j, "max_tilt_deg", g.max_tilt_deg);
}

void to_json(nlohmann::json& j, const Orientation& o) { j = {{"theta_x_deg", o.theta_x_deg}, {"theta_y_deg", o.theta_y_deg}}; }

void from_json(const nlohmann::json& j, Orientation& o) {
    reject_unknown(j, {"theta_x_deg", "theta_y_deg"}, "orientation");
    read_opt(j, "theta_x_deg", o.theta_x_deg);
    read_opt(j, "theta_y_deg", o.theta_y_deg);
}

void to_json(nlohmann::json& j, const PatternParams& p) {
    j = {{"min_features", p.min_features},
         {"max_features", p.max_features},
         {"min_width", p.min_width},
         {"max_width", p.max_width},
         {"min_length", p.min_length},
         {"max_length", p.max_length},
         {"trace_probability", p.trace_probability},
         {"min_fill", p.min_fill},
         {"max_fill", p.max_fill},
         {"etched_phase", p.etched_phase},
         {"seed", p.seed}};
}

void from_json(const nlohmann::json& j, PatternParams& p) {
    reject_unknown(j,
                   {"min_features", "max_features", "min_width", "max_width", "min_length", "max_length",
                    "trace_probability", "min_fill", "max_fill", "etched_phase", "seed"},
                   "pattern");
    read_opt(j, "min_features", p.min_features);
    read_opt(j, "max_features", p.max_features);
    read_opt(j, "min_width", p.min_width);
    read_opt(j, "max_width", p.max_width);
    read_opt(j, "min_length", p.min_length);
    read_opt(j, "max_length", p.max_length);
    read_opt(j, "trace_probability", p.trace_probability);
    read_opt(j, "min_fill", p.min_fill);
    read_opt(j, "max_fill", p.max_fill);
    read_opt(j, "etched_phase", p.etched_phase);
    read_opt(j, "seed", p.seed);
}

// Thread count is a run-time setting, not part of the solver record.
void to_json(nlohmann::json& j, const SolverConfig& c) {
    j = {{"iterations", c.iterations},
         {"step", c.step},
         {"tv_alpha", c.tv_alpha},
         {"tv_inner_iters", c.tv_inner_iters},
         {"record_cost", c.record_cost},
         {"momentum", c.momentum},
         {"layers", c.layers},
         {"divergence_factor", c.divergence_factor}};
}

void from_json(const nlohmann::json& j, SolverConfig& c) {
    reject_unknown(j,
                   {"iterations", "step", "tv_alpha", "tv_inner_iters", "record_cost", "momentum", "layers",
                    "divergence_factor"},
                   "solver");
    read_opt(j, "iterations", c.iterations);
    read_opt(j, "step", c.step);
    read_opt(j, "tv_alpha", c.tv_alpha);
    read_opt(j, "tv_inner_iters", c.tv_inner_iters);
    read_opt(j, "record_cost", c.record_cost);
    read_opt(j, "momentum", c.momentum);
    read_opt(j, "layers", c.layers);
    read_opt(j, "divergence_factor", c.divergence_factor);
}

DatasetSplits DatasetSplits::for_count(std::size_t count) {
    DatasetSplits s;
    s.validation = count / 12;
    s.test = count / 12;
    s.train = count - s.validation - s.test;
    return s;
}

void RunConfig::validate() const {
    geometry.validate();
    if (layers < 1) throw std::invalid_argument("layers must be >= 1");
    if (views % 2 != 0) throw std::invalid_argument("views must be even (x sweep + y sweep)");
    if (!(max_tilt_deg >= 0.0) || max_tilt_deg > geometry.max_tilt_deg)
        throw std::invalid_argument("protocol tilt range exceeds the geometry's tilt guard");
    approximant.validate();
    lt.validate();
    pattern.validate();
    if (splits.total() != dataset_count)
        throw std::invalid_argument("dataset splits (" + std::to_string(splits.train) + "/" +
                                    std::to_string(splits.validation) + "/" + std::to_string(splits.test) +
                                    ") do not add up to count " + std::to_string(dataset_count));
}

namespace {

// Solver layer counts always follow the top-level layer count.
SolverConfig synced(SolverConfig s, std::size_t layers) {
    s.layers = layers;
    return s;
}

}  // namespace

void to_json(nlohmann::json& j, const RunConfig& c) {
    j = {{"geometry", c.geometry},
         {"layers", c.layers},
         {"views", c.views},
         {"max_tilt_deg", c.max_tilt_deg},
         {"approximant", synced(c.approximant, c.layers)},
         {"lt", synced(c.lt, c.layers)},
         {"pattern", c.pattern},
         {"dataset", {{"count", c.dataset_count},
                      {"train", c.splits.train},
                      {"validation", c.splits.validation},
                      {"test", c.splits.test}}},
         {"seed", c.seed},
         {"threads", c.threads}};
}

void from_json(const nlohmann::json& j, RunConfig& c) {
    reject_unknown(j,
                   {"geometry", "layers", "views", "max_tilt_deg", "approximant", "lt", "pattern", "dataset", "seed",
                    "threads"},
                   "config");
    read_opt(j, "geometry", c.geometry);
    read_opt(j, "layers", c.layers);
    read_opt(j, "views", c.views);
    read_opt(j, "max_tilt_deg", c.max_tilt_deg);
    read_opt(j, "approximant", c.approximant);
    read_opt(j, "lt", c.lt);
    read_opt(j, "pattern", c.pattern);
    read_opt(j, "seed", c.seed);
    read_opt(j, "threads", c.threads);
    if (auto it = j.find("dataset"); it != j.end()) {
        reject_unknown(*it, {"count", "train", "validation", "test"}, "dataset");
        read_opt(*it, "count", c.dataset_count);
        if (it->contains("train") || it->contains("validation") || it->contains("test")) {
            read_opt(*it, "train", c.splits.train);
            read_opt(*it, "validation", c.splits.validation);
            read_opt(*it, "test", c.splits.test);
        } else {
            c.splits = DatasetSplits::for_count(c.dataset_count);
        }
    }
    c.approximant.layers = c.layers;
    c.lt.layers = c.layers;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
    RunConfig c;
    from_json(j, c);
    return c;
}

}  // namespace difftomo
