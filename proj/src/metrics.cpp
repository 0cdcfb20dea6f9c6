#include "difftomo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace difftomo {

namespace {

double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace

double pcc(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("pcc: inputs differ in size");
    if (a.empty()) throw UndefinedMetric("pcc: empty input");
    const double ma = mean_of(a), mb = mean_of(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0) throw UndefinedMetric("pcc: undefined for a constant image");
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double pcc(const RealMap& a, const RealMap& b) {
    require_same_grid(a.grid(), b.grid(), "pcc");
    return pcc(a.values(), b.values());
}

double npcc(std::span<const double> a, std::span<const double> b) { return -pcc(a, b); }
double npcc(const RealMap& a, const RealMap& b) { return -pcc(a, b); }

AffineCalibration affine_calibrate(const std::vector<RealMap>& outputs, const std::vector<RealMap>& truths) {
    if (outputs.size() != truths.size() || outputs.empty())
        throw std::invalid_argument("affine_calibrate: need equal, non-zero counts of outputs and truths");
    double n = 0.0, so = 0.0, st = 0.0;
    for (std::size_t k = 0; k < outputs.size(); ++k) {
        require_same_grid(outputs[k].grid(), truths[k].grid(), "affine_calibrate");
        for (std::size_t i = 0; i < outputs[k].size(); ++i) {
            so += outputs[k][i];
            st += truths[k][i];
        }
        n += static_cast<double>(outputs[k].size());
    }
    const double mo = so / n, mt = st / n;
    double soo = 0.0, sot = 0.0;
    for (std::size_t k = 0; k < outputs.size(); ++k) {
        for (std::size_t i = 0; i < outputs[k].size(); ++i) {
            const double d = outputs[k][i] - mo;
            soo += d * d;
            sot += d * (truths[k][i] - mt);
        }
    }
    if (soo == 0.0) throw UndefinedMetric("affine_calibrate: outputs have zero variance");
    const double a = sot / soo;
    return {a, mt - a * mo};
}

std::vector<AffineCalibration> affine_calibrate(const std::vector<ObjectStack>& outputs,
                                                const std::vector<ObjectStack>& truths, bool per_layer) {
    if (outputs.size() != truths.size() || outputs.empty())
        throw std::invalid_argument("affine_calibrate: need equal, non-zero counts of stacks");
    const std::size_t L = outputs.front().layer_count();
    for (std::size_t k = 0; k < outputs.size(); ++k)
        if (outputs[k].layer_count() != L || truths[k].layer_count() != L)
            throw std::invalid_argument("affine_calibrate: layer counts differ");

    if (!per_layer) {
        std::vector<RealMap> o, t;
        for (std::size_t k = 0; k < outputs.size(); ++k) {
            o.insert(o.end(), outputs[k].phases().begin(), outputs[k].phases().end());
            t.insert(t.end(), truths[k].phases().begin(), truths[k].phases().end());
        }
        return {affine_calibrate(o, t)};
    }
    std::vector<AffineCalibration> out;
    for (std::size_t l = 0; l < L; ++l) {
        std::vector<RealMap> o, t;
        for (std::size_t k = 0; k < outputs.size(); ++k) {
            o.push_back(outputs[k].phase(l));
            t.push_back(truths[k].phase(l));
        }
        out.push_back(affine_calibrate(o, t));
    }
    return out;
}

ReconstructionReport evaluate(const ObjectStack& recon, const ObjectStack& truth,
                              const std::vector<AffineCalibration>& calibration) {
    if (recon.layer_count() != truth.layer_count()) throw std::invalid_argument("evaluate: layer counts differ");
    require_same_grid(recon.grid(), truth.grid(), "evaluate");
    if (!calibration.empty() && calibration.size() != 1 && calibration.size() != recon.layer_count())
        throw std::invalid_argument("evaluate: calibration must have 1 or L entries");

    ReconstructionReport report;
    report.calibration = calibration;
    for (std::size_t l = 0; l < recon.layer_count(); ++l) {
        RealMap layer = recon.phase(l);
        if (!calibration.empty()) {
            const auto& c = calibration.size() == 1 ? calibration.front() : calibration[l];
            for (double& v : layer.values()) v = c.scale * v + c.offset;
        }
        report.layer_pcc.push_back(pcc(layer, truth.phase(l)));
    }
    report.mean_pcc = std::accumulate(report.layer_pcc.begin(), report.layer_pcc.end(), 0.0) /
                      static_cast<double>(report.layer_pcc.size());
    return report;
}

nlohmann::json ReconstructionReport::to_json() const {
    nlohmann::json j;
    j["layer_pcc"] = layer_pcc;
    std::vector<double> percent;
    for (double v : layer_pcc) percent.push_back(100.0 * v);
    j["layer_pcc_percent"] = percent;
    j["mean_pcc"] = mean_pcc;
    j["mean_pcc_percent"] = 100.0 * mean_pcc;
    auto cal = nlohmann::json::array();
    for (const auto& c : calibration) cal.push_back({{"scale", c.scale}, {"offset", c.offset}});
    j["calibration"] = cal;
    j["cost_history"] = cost_history;
    j["timings_seconds"] = timings;
    return j;
}

AggregateReport aggregate(const std::vector<ReconstructionReport>& reports) {
    AggregateReport out;
    out.examples = reports.size();
    if (reports.empty()) return out;
    const std::size_t L = reports.front().layer_pcc.size();
    out.layer_mean.assign(L, 0.0);
    out.layer_std.assign(L, 0.0);
    for (const auto& r : reports) {
        if (r.layer_pcc.size() != L) throw std::invalid_argument("aggregate: layer counts differ");
        for (std::size_t l = 0; l < L; ++l) out.layer_mean[l] += r.layer_pcc[l];
    }
    const double n = static_cast<double>(reports.size());
    for (double& m : out.layer_mean) m /= n;
    if (reports.size() > 1) {
        for (const auto& r : reports)
            for (std::size_t l = 0; l < L; ++l) out.layer_std[l] += std::pow(r.layer_pcc[l] - out.layer_mean[l], 2);
        for (double& s : out.layer_std) s = std::sqrt(s / (n - 1.0));
    }
    out.mean = std::accumulate(out.layer_mean.begin(), out.layer_mean.end(), 0.0) / static_cast<double>(L);
    return out;
}

nlohmann::json AggregateReport::to_json() const {
    return {{"layer_mean", layer_mean}, {"layer_std", layer_std}, {"mean", mean}, {"examples", examples}};
}

namespace {

std::string percent(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", 100.0 * v);
    return buf;
}

}  // namespace

std::string format_pcc_table(const std::vector<std::pair<std::string, AggregateReport>>& rows) {
    std::ostringstream out;
    std::size_t L = 0;
    for (const auto& [_, r] : rows) L = std::max(L, r.layer_mean.size());
    char cell[64];
    std::snprintf(cell, sizeof cell, "%-16s", "PCC x 100");
    out << cell;
    for (std::size_t l = 0; l < L; ++l) {
        std::snprintf(cell, sizeof cell, " %14s", ("layer " + std::to_string(l + 1)).c_str());
        out << cell;
    }
    std::snprintf(cell, sizeof cell, " %14s\n", "mean");
    out << cell;
    for (const auto& [label, r] : rows) {
        std::snprintf(cell, sizeof cell, "%-16s", label.c_str());
        out << cell;
        for (std::size_t l = 0; l < r.layer_mean.size(); ++l) {
            std::string v = percent(r.layer_mean[l]);
            if (r.examples > 1) v += " +/- " + percent(r.layer_std[l]);
            std::snprintf(cell, sizeof cell, " %14s", v.c_str());
            out << cell;
        }
        std::snprintf(cell, sizeof cell, " %14s\n", percent(r.mean).c_str());
        out << cell;
    }
    return out.str();
}

std::string format_pcc_csv(const std::vector<std::pair<std::string, AggregateReport>>& rows) {
    std::ostringstream out;
    out << "method,layer,pcc_percent_mean,pcc_percent_std,examples\n";
    for (const auto& [label, r] : rows)
        for (std::size_t l = 0; l < r.layer_mean.size(); ++l)
            out << label << ',' << l + 1 << ',' << percent(r.layer_mean[l]) << ',' << percent(r.layer_std[l]) << ','
                << r.examples << '\n';
    return out.str();
}

}  // namespace difftomo
