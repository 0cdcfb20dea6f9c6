#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <map>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "difftomo/config.hpp"
#include "difftomo/dataio.hpp"
#include "difftomo/forward.hpp"
#include "difftomo/inverse.hpp"
#include "difftomo/metrics.hpp"
#include "difftomo/parallel.hpp"
#include "difftomo/phantom.hpp"
#include "difftomo/random.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace difftomo;

namespace {

struct Globals {
    std::string config_path;
    std::uint64_t seed = 0;
    std::size_t threads = 0;
    bool json_out = false;
    bool dry_run = false;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* threads_opt = nullptr;
};

// Human-readable lines go to stdout, or to stderr when --json owns stdout.
class Log {
public:
    explicit Log(bool json_mode) : out_(json_mode ? std::cerr : std::cout) {}

    template <class... Args>
    void line(const Args&... args) {
        (out_ << ... << args) << '\n';
    }

    void timing(const std::string& stage, double seconds) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "[time] %-18s %9.3f s", stage.c_str(), seconds);
        out_ << buf << '\n';
        timings_[stage] = seconds;
    }

    const std::map<std::string, double>& timings() const { return timings_; }

private:
    std::ostream& out_;
    std::map<std::string, double> timings_;
};

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    }

private:
    std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

// Tracks what a command writes so a failure can take it all back.
class OutputGuard {
public:
    explicit OutputGuard(fs::path dir) : dir_(std::move(dir)), existed_(fs::exists(dir_)) {
        if (existed_ && !fs::is_directory(dir_)) throw std::invalid_argument(dir_.string() + " is not a directory");
    }
    ~OutputGuard() {
        if (committed_) return;
        std::error_code ec;
        if (!existed_) {
            fs::remove_all(dir_, ec);
            return;
        }
        for (const auto& p : written_) fs::remove_all(p, ec);
    }

    fs::path path(const fs::path& rel) {
        const fs::path p = dir_ / rel;
        fs::create_directories(p.parent_path());
        written_.push_back(dir_ / *rel.begin());
        return p;
    }
    const fs::path& dir() const { return dir_; }
    void commit() { committed_ = true; }

private:
    fs::path dir_;
    bool existed_;
    bool committed_ = false;
    std::vector<fs::path> written_;
};

RunConfig resolve_config(const Globals& g) {
    RunConfig cfg;
    if (!g.config_path.empty()) cfg = load_run_config(g.config_path);
    if (g.seed_opt && g.seed_opt->count()) cfg.seed = g.seed;
    if (g.threads_opt && g.threads_opt->count()) cfg.threads = g.threads;
    if (cfg.threads == 0) cfg.threads = default_thread_count();
    return cfg;
}

std::string fmt(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::vector<fs::path> layer_images(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw std::invalid_argument("phantom directory " + dir.string() + " does not exist");
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        std::string ext = e.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (e.is_regular_file() && (ext == ".png" || ext == ".pgm")) out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    if (out.empty()) throw std::invalid_argument("phantom directory " + dir.string() + " holds no .png/.pgm layers");
    return out;
}

void render_stack(OutputGuard& out, const ObjectStack& s, const std::string& prefix, double etched_phase) {
    const auto [lo, hi] = phase_render_range(etched_phase);
    for (std::size_t l = 0; l < s.layer_count(); ++l)
        export_image(s.phase(l), out.path(fs::path("renders") / (prefix + "_layer" + std::to_string(l + 1) + ".png")),
                     lo, hi);
}

void print_json(const json& j) { std::cout << j.dump(2) << '\n'; }

// ---------------------------------------------------------------------------

struct SimulateArgs {
    bool synthetic = false;
    std::string phantom_dir;
    std::size_t views = 22;
    bool no_noise = false;
    bool resample = false;
    std::string out;
    CLI::Option* views_opt = nullptr;
};

int cmd_simulate(const Globals& g, const SimulateArgs& a) {
    Log log(g.json_out);
    RunConfig cfg = resolve_config(g);
    if (a.views_opt->count()) cfg.views = a.views;
    cfg.validate();
    if (a.synthetic == !a.phantom_dir.empty())
        throw std::invalid_argument("choose exactly one of --synthetic or --phantom-dir");
    std::vector<fs::path> images;
    if (!a.phantom_dir.empty()) images = layer_images(a.phantom_dir);
    const auto orientations = make_protocol(cfg.views, cfg.max_tilt_deg);
    for (const auto& o : orientations) illumination_carrier(cfg.geometry, o);

    if (g.dry_run) {
        log.line("plan: simulate ", orientations.size(), " views on a ", cfg.geometry.grid.nx, "x",
                 cfg.geometry.grid.ny, " grid, ",
                 a.synthetic ? std::to_string(cfg.layers) + " synthetic layers"
                             : std::to_string(images.size()) + " layers from " + a.phantom_dir,
                 ", noise ", a.no_noise ? "off" : "on", ", seed ", cfg.seed, " -> ", a.out);
        return 0;
    }

    Stopwatch sw;
    ObjectStack truth;
    if (a.synthetic) {
        PatternParams p = cfg.pattern;
        p.seed = derive_seed(cfg.seed, 0);
        truth = synthesize_stack(cfg.geometry.grid, cfg.layers, cfg.geometry.dz, p);
    } else {
        truth = load_layer_images(images, cfg.pattern.etched_phase, cfg.geometry.grid, cfg.geometry.dz, a.resample);
    }
    log.timing("phantom", sw.seconds());

    Stopwatch sw_fwd;
    const auto meas = simulate_measurements(truth, cfg.geometry, orientations, !a.no_noise,
                                            derive_seed(cfg.seed, 1), cfg.threads);
    log.timing("forward", sw_fwd.seconds());

    Stopwatch sw_io;
    OutputGuard out(a.out);
    fs::create_directories(out.dir());
    write_stack(out.path("truth.dtom"), truth);
    out.path("meas.dtom");
    out.path("meta.json");
    save_measurements(out.dir(), meas,
                      {{"layers", truth.layer_count()},
                       {"seed", cfg.seed},
                       {"noise", !a.no_noise},
                       {"source", a.synthetic ? "synthetic" : "phantom-dir"}});
    render_stack(out, truth, "truth", cfg.pattern.etched_phase);
    load_measurements(out.dir());
    read_array_dims(out.dir() / "truth.dtom");
    out.commit();
    log.timing("write", sw_io.seconds());

    if (g.json_out)
        print_json({{"out", a.out}, {"views", meas.view_count()}, {"layers", truth.layer_count()},
                    {"timings_seconds", log.timings()}});
    else
        log.line("wrote ", meas.view_count(), " views and a ", truth.layer_count(), "-layer truth to ", a.out);
    return 0;
}

// ---------------------------------------------------------------------------

struct SolveArgs {
    std::string meas;
    std::string out;
    std::size_t k = 0;
    double step = 0.0;
    double tv_alpha = 0.0;
    std::size_t tv_iters = 0;
    bool no_momentum = false;
    CLI::Option *k_opt = nullptr, *step_opt = nullptr, *alpha_opt = nullptr, *iters_opt = nullptr;
};

int cmd_solve(const Globals& g, const SolveArgs& a, bool lt) {
    Log log(g.json_out);
    RunConfig rc = resolve_config(g);
    SolverConfig cfg = lt ? rc.lt : rc.approximant;
    if (a.k_opt->count()) cfg.iterations = a.k;
    if (a.step_opt->count()) cfg.step = a.step;
    if (a.alpha_opt->count()) cfg.tv_alpha = a.tv_alpha;
    if (a.iters_opt->count()) cfg.tv_inner_iters = a.tv_iters;
    if (a.no_momentum) cfg.momentum = false;
    cfg.threads = rc.threads;
    cfg.record_cost = true;

    const fs::path meas_dir = a.meas;
    const json meta = read_meta(meas_dir);
    cfg.layers = meta.value("layers", rc.layers);
    cfg.validate();
    const char* method = lt ? "lt" : "approx";

    if (g.dry_run) {
        log.line("plan: ", lt ? "learning tomography" : "approximant", " K=", cfg.iterations, " s=", cfg.step,
                 " tv_alpha=", cfg.tv_alpha, " tv_iters=", cfg.tv_inner_iters, " layers=", cfg.layers,
                 lt ? (cfg.momentum ? " momentum=on" : " momentum=off") : "", " threads=", cfg.threads, " on ",
                 a.meas, " -> ", a.out);
        return 0;
    }

    Stopwatch sw_load;
    const MeasurementSet meas = load_measurements(meas_dir);
    log.timing("load", sw_load.seconds());

    const SolverResult res = lt ? lt_reconstruct(meas, cfg) : approximant(meas, cfg);
    for (std::size_t i = 0; i < res.cost_history.size(); ++i) log.line("iter ", i, "  J = ", res.cost_history[i]);
    log.timing(lt ? "lt_reconstruct" : "approximant", res.seconds);

    ReconstructionReport report;
    const fs::path truth_path = meas_dir / "truth.dtom";
    if (fs::exists(truth_path)) {
        const ObjectStack truth = read_stack(truth_path, meas.geometry.grid.pitch, meas.geometry.dz);
        if (truth.layer_count() == res.estimate.layer_count()) {
            report = evaluate(res.estimate, truth);
            std::string row;
            for (double v : report.layer_pcc) row += " " + fmt(100.0 * v, 1);
            log.line("PCC x 100 per layer:", row, "  (mean ", fmt(100.0 * report.mean_pcc, 1), ")");
        }
    }
    report.cost_history = res.cost_history;

    Stopwatch sw_io;
    OutputGuard out(a.out);
    fs::create_directories(out.dir());
    const std::string stack_name = std::string(method) + ".dtom";
    write_stack(out.path(stack_name), res.estimate);
    render_stack(out, res.estimate, method, rc.pattern.etched_phase);
    log.timing("write", sw_io.seconds());
    report.timings = log.timings();
    json rj = report.to_json();
    rj["method"] = lt ? "learning_tomography" : "approximant";
    rj["solver"] = cfg;
    write_text_atomic(out.path("report.json"), rj.dump(2) + "\n");
    read_array_dims(out.dir() / stack_name);
    out.commit();

    if (g.json_out) print_json(rj);
    return 0;
}

// ---------------------------------------------------------------------------

struct DatasetArgs {
    std::size_t count = 60;
    std::vector<std::size_t> splits;
    std::string out;
    bool force = false;
    bool no_renders = false;
    CLI::Option* count_opt = nullptr;
};

int cmd_dataset(const Globals& g, const DatasetArgs& a) {
    Log log(g.json_out);
    RunConfig cfg = resolve_config(g);
    if (a.count_opt->count()) {
        cfg.dataset_count = a.count;
        cfg.splits = DatasetSplits::for_count(a.count);
    }
    if (!a.splits.empty()) {
        if (a.splits.size() != 3) throw std::invalid_argument("--splits takes train,validation,test");
        cfg.splits = {a.splits[0], a.splits[1], a.splits[2]};
        if (!a.count_opt->count()) cfg.dataset_count = cfg.splits.total();
    }
    cfg.validate();

    DatasetOptions opt;
    opt.geometry = cfg.geometry;
    opt.layers = cfg.layers;
    opt.views = cfg.views;
    opt.max_tilt_deg = cfg.max_tilt_deg;
    opt.pattern = cfg.pattern;
    opt.approximant = cfg.approximant;
    opt.count = cfg.dataset_count;
    opt.splits = cfg.splits;
    opt.seed = cfg.seed;
    opt.threads = cfg.threads;
    opt.force = a.force;
    opt.renders = !a.no_renders;

    if (g.dry_run) {
        log.line("plan: dataset of ", opt.count, " examples (", opt.splits.train, "/", opt.splits.validation, "/",
                 opt.splits.test, "), ", opt.views, " views, approximant K=", opt.approximant.iterations,
                 " s=", opt.approximant.step, ", seed ", opt.seed, ", threads ", opt.threads, " -> ", a.out);
        return 0;
    }

    Stopwatch sw;
    generate_dataset(opt, a.out);
    log.timing("dataset", sw.seconds());
    Stopwatch sw_check;
    const DatasetManifest m = validate_dataset(a.out);
    log.timing("validate", sw_check.seconds());
    if (g.json_out)
        print_json({{"out", a.out}, {"examples", m.entries.size()}, {"timings_seconds", log.timings()}});
    else
        log.line("wrote ", m.entries.size(), " examples to ", a.out);
    return 0;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
    std::string recon;
    std::string truth;
    std::string dataset;
    std::string split = "test";
    bool with_lt = false;
    bool calibrate = false;
    bool per_layer = false;
    std::string csv;
};

std::vector<fs::path> stack_files(const fs::path& p) {
    if (fs::is_regular_file(p)) return {p};
    if (!fs::is_directory(p)) throw std::invalid_argument(p.string() + " does not exist");
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(p))
        if (e.is_regular_file() && e.path().extension() == ".dtom") out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

AggregateReport score(const std::vector<ObjectStack>& recon, const std::vector<ObjectStack>& truth,
                      const EvaluateArgs& a) {
    std::vector<AffineCalibration> cal;
    if (a.calibrate) cal = affine_calibrate(recon, truth, a.per_layer);
    std::vector<ReconstructionReport> reports;
    for (std::size_t i = 0; i < recon.size(); ++i) reports.push_back(evaluate(recon[i], truth[i], cal));
    return aggregate(reports);
}

int cmd_evaluate(const Globals& g, const EvaluateArgs& a) {
    Log log(g.json_out);
    RunConfig cfg = resolve_config(g);
    const bool dataset_mode = !a.dataset.empty();
    if (dataset_mode == (!a.recon.empty() || !a.truth.empty()))
        throw std::invalid_argument("use either --dataset or both --recon and --truth");
    if (!dataset_mode && (a.recon.empty() || a.truth.empty()))
        throw std::invalid_argument("--recon and --truth go together");
    if (a.with_lt && !dataset_mode) throw std::invalid_argument("--with-lt needs --dataset");

    std::vector<std::pair<std::string, AggregateReport>> rows;
    Stopwatch sw;
    if (dataset_mode) {
        const DatasetManifest m = validate_dataset(a.dataset);
        std::vector<const ManifestEntry*> sel;
        for (const auto& e : m.entries)
            if (e.split == a.split) sel.push_back(&e);
        if (sel.empty()) throw std::invalid_argument("dataset has no '" + a.split + "' examples");
        if (g.dry_run) {
            log.line("plan: evaluate ", sel.size(), " ", a.split, " examples", a.with_lt ? " with LT" : "");
            return 0;
        }
        const double pitch = m.geometry.grid.pitch, dz = m.geometry.dz;
        std::vector<ObjectStack> truth(sel.size()), approx(sel.size()), ltr(a.with_lt ? sel.size() : 0);
        SolverConfig lt_cfg = cfg.lt;
        lt_cfg.layers = m.layers;
        lt_cfg.record_cost = false;
        lt_cfg.threads = 1;
        parallel_for(sel.size(), cfg.threads, [&](std::size_t i) {
            truth[i] = read_stack(fs::path(a.dataset) / sel[i]->truth, pitch, dz);
            approx[i] = read_stack(fs::path(a.dataset) / sel[i]->approx, pitch, dz);
            if (a.with_lt) {
                const auto meas = load_measurements((fs::path(a.dataset) / sel[i]->meas).parent_path());
                ltr[i] = lt_reconstruct(meas, lt_cfg).estimate;
            }
        });
        rows.emplace_back("approximant", score(approx, truth, a));
        if (a.with_lt) rows.emplace_back("LT", score(ltr, truth, a));
    } else {
        const auto rf = stack_files(a.recon), tf = stack_files(a.truth);
        if (rf.size() != tf.size() || rf.empty())
            throw std::invalid_argument("--recon and --truth must name the same number of .dtom stacks");
        if (g.dry_run) {
            log.line("plan: evaluate ", rf.size(), " stack pair(s)");
            return 0;
        }
        std::vector<ObjectStack> r, t;
        for (std::size_t i = 0; i < rf.size(); ++i) {
            r.push_back(read_stack(rf[i], 1.0, 1.0));
            t.push_back(read_stack(tf[i], 1.0, 1.0));
        }
        rows.emplace_back("recon", score(r, t, a));
    }
    log.timing("evaluate", sw.seconds());

    if (!a.csv.empty()) write_text_atomic(a.csv, format_pcc_csv(rows));
    if (g.json_out) {
        json j = json::object();
        for (const auto& [label, r] : rows) j[label] = r.to_json();
        j["calibrated"] = a.calibrate;
        print_json(j);
    } else {
        std::cout << format_pcc_table(rows);
    }
    return 0;
}

// ---------------------------------------------------------------------------

struct FresnelArgs {
    std::vector<double> sizes_um;
    double wavelength_nm = 632.8;
    double distance_mm = 58.0;
};

int cmd_fresnel(const Globals& g, const FresnelArgs& a) {
    std::vector<double> sizes = a.sizes_um;
    if (sizes.empty()) sizes = {160.0, 200.0, 250.0, 300.0, 350.0, 400.0, 449.0};
    json rows = json::array();
    if (!g.json_out)
        std::cout << "lambda = " << fmt(a.wavelength_nm, 1) << " nm, d = " << fmt(a.distance_mm, 1) << " mm\n";
    for (double s : sizes) {
        const double f = fresnel_number(s * 1e-6, a.wavelength_nm * 1e-9, a.distance_mm * 1e-3);
        if (g.json_out) rows.push_back({{"feature_um", s}, {"fresnel_number", f}});
        else std::cout << "a = " << fmt(s, 0) << " um  F = " << fmt(f, 1) << '\n';
    }
    if (g.json_out) print_json({{"wavelength_nm", a.wavelength_nm}, {"distance_mm", a.distance_mm}, {"rows", rows}});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"difftomo: limited-angle optical diffraction tomography"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--config", g.config_path, "JSON run configuration")->check(CLI::ExistingFile);
    g.seed_opt = app.add_option("--seed", g.seed, "base random seed");
    g.threads_opt = app.add_option("--threads", g.threads, "worker threads (default DIFFTOMO_THREADS or all cores)");
    app.add_flag("--json", g.json_out, "machine-readable output on stdout");
    app.add_flag("--dry-run", g.dry_run, "validate and print the plan without writing anything");

    SimulateArgs sim;
    auto* c_sim = app.add_subcommand("simulate", "synthesize or load a phantom and simulate its measurements");
    c_sim->add_flag("--synthetic", sim.synthetic, "random Manhattan-geometry layers");
    c_sim->add_option("--phantom-dir", sim.phantom_dir, "directory of binary layer images, one per layer");
    sim.views_opt = c_sim->add_option("--views", sim.views, "number of views (x sweep then y sweep)");
    c_sim->add_flag("--no-noise", sim.no_noise, "noiseless intensities");
    c_sim->add_flag("--resample", sim.resample, "resample layer images to the grid");
    c_sim->add_option("--out", sim.out, "output directory")->required();

    SolveArgs apx;
    auto* c_apx = app.add_subcommand("approximant", "fixed-step gradient descent from zero");
    c_apx->add_option("--meas", apx.meas, "measurement directory")->required()->check(CLI::ExistingDirectory);
    apx.k_opt = c_apx->add_option("--k", apx.k, "iterations (default 8)");
    apx.step_opt = c_apx->add_option("--step", apx.step, "step size (default 0.05)");
    apx.alpha_opt = c_apx->add_option("--tv-alpha", apx.tv_alpha, "TV weight (default 0)");
    apx.iters_opt = c_apx->add_option("--tv-iters", apx.tv_iters, "inner TV iterations (default 20)");
    c_apx->add_option("--out", apx.out, "output directory")->required();

    SolveArgs ltr;
    auto* c_lt = app.add_subcommand("reconstruct-lt", "FISTA with TV (Learning Tomography baseline)");
    c_lt->add_option("--meas", ltr.meas, "measurement directory")->required()->check(CLI::ExistingDirectory);
    ltr.k_opt = c_lt->add_option("--k", ltr.k, "iterations (default 30)");
    ltr.step_opt = c_lt->add_option("--step", ltr.step, "step size (default 0.05)");
    ltr.alpha_opt = c_lt->add_option("--tv-alpha", ltr.tv_alpha, "TV weight (default 0.04)");
    ltr.iters_opt = c_lt->add_option("--tv-iters", ltr.tv_iters, "inner TV iterations (default 20)");
    c_lt->add_flag("--no-momentum", ltr.no_momentum, "plain proximal gradient, no FISTA extrapolation");
    c_lt->add_option("--out", ltr.out, "output directory")->required();

    DatasetArgs ds;
    auto* c_ds = app.add_subcommand("dataset", "generate a synthetic training dataset");
    ds.count_opt = c_ds->add_option("--count", ds.count, "number of examples (default 60)");
    c_ds->add_option("--splits", ds.splits, "train,validation,test counts")->delimiter(',');
    c_ds->add_option("--out", ds.out, "dataset directory")->required();
    c_ds->add_flag("--force", ds.force, "overwrite an existing dataset");
    c_ds->add_flag("--no-renders", ds.no_renders, "skip PNG renders of test examples");

    EvaluateArgs ev;
    auto* c_ev = app.add_subcommand("evaluate", "per-layer PCC (percent) of reconstructions against truth");
    c_ev->add_option("--recon", ev.recon, ".dtom stack or directory of stacks");
    c_ev->add_option("--truth", ev.truth, ".dtom stack or directory of stacks");
    c_ev->add_option("--dataset", ev.dataset, "dataset directory (scores its stored approximants)");
    c_ev->add_option("--split", ev.split, "dataset split to score (default test)");
    c_ev->add_flag("--with-lt", ev.with_lt, "also run LT on the dataset examples and score it");
    c_ev->add_flag("--calibrate", ev.calibrate, "fit an affine map of outputs to truth before scoring");
    c_ev->add_flag("--per-layer", ev.per_layer, "one affine fit per layer instead of pooled");
    c_ev->add_option("--csv", ev.csv, "also write the table as CSV");

    FresnelArgs fr;
    auto* c_fr = app.add_subcommand("fresnel", "Fresnel numbers a^2/(lambda d) of feature sizes");
    c_fr->add_option("--size", fr.sizes_um, "feature size in micrometers (repeatable)");
    c_fr->add_option("--wavelength-nm", fr.wavelength_nm, "wavelength in nm (default 632.8)");
    c_fr->add_option("--distance-mm", fr.distance_mm, "propagation distance in mm (default 58)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*c_sim) return cmd_simulate(g, sim);
        if (*c_apx) return cmd_solve(g, apx, false);
        if (*c_lt) return cmd_solve(g, ltr, true);
        if (*c_ds) return cmd_dataset(g, ds);
        if (*c_ev) return cmd_evaluate(g, ev);
        if (*c_fr) return cmd_fresnel(g, fr);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
