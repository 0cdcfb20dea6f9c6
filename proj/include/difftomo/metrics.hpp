#pragma once

#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "difftomo/phantom.hpp"

namespace difftomo {

/// Raised when a correlation or regression is undefined (constant input).
class UndefinedMetric : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Pearson correlation coefficient, clamped to [-1, 1]. Throws UndefinedMetric
/// when either input is constant and std::invalid_argument on a size mismatch.
double pcc(std::span<const double> a, std::span<const double> b);
double pcc(const RealMap& a, const RealMap& b);

/// -pcc(a, b).
double npcc(std::span<const double> a, std::span<const double> b);
double npcc(const RealMap& a, const RealMap& b);

/// Least-squares (a, b) minimizing sum ||a * output + b - truth||^2.
struct AffineCalibration {
    double scale = 1.0;
    double offset = 0.0;
};

/// Pools every pixel of every map. Throws UndefinedMetric when the pooled
/// outputs have zero variance.
AffineCalibration affine_calibrate(const std::vector<RealMap>& outputs, const std::vector<RealMap>& truths);

/// Pools all layers of all stacks (per_layer = false) or fits one (a, b) per
/// layer index across the stacks (per_layer = true).
std::vector<AffineCalibration> affine_calibrate(const std::vector<ObjectStack>& outputs,
                                                const std::vector<ObjectStack>& truths, bool per_layer);

struct ReconstructionReport {
    std::vector<double> layer_pcc;
    double mean_pcc = 0.0;
    std::vector<AffineCalibration> calibration;  // empty when uncalibrated
    std::vector<double> cost_history;
    std::map<std::string, double> timings;       // seconds per stage

    nlohmann::json to_json() const;
};

/// Per-layer PCC of recon against truth after the optional calibration
/// (one entry applies to all layers; L entries apply per layer).
ReconstructionReport evaluate(const ObjectStack& recon, const ObjectStack& truth,
                              const std::vector<AffineCalibration>& calibration = {});

/// Per-layer mean and sample standard deviation over a test set.
struct AggregateReport {
    std::vector<double> layer_mean;
    std::vector<double> layer_std;
    double mean = 0.0;
    std::size_t examples = 0;

    nlohmann::json to_json() const;
};

AggregateReport aggregate(const std::vector<ReconstructionReport>& reports);

/// Table with one row per labelled result and PCC x 100 to one decimal.
std::string format_pcc_table(const std::vector<std::pair<std::string, AggregateReport>>& rows);
std::string format_pcc_csv(const std::vector<std::pair<std::string, AggregateReport>>& rows);

}  // namespace difftomo
