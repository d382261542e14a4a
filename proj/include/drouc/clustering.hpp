#pragma once

#include <array>
#include <string>
#include <vector>

#include "drouc/market_data.hpp"

namespace drouc {

// One day as a 2-channel time series: values[h] = {net load, price}, both
// z-scored over the training set before clustering.
using Series = std::vector<std::array<double, 2>>;

struct SeriesPoint {
    Series values;
    Date source_date;
};

struct NormalizationStats {
    double eta_mean = 0.0, eta_std = 1.0;
    double lambda_mean = 0.0, lambda_std = 1.0;
};

NormalizationStats normalization_stats(const Dataset& train);
std::vector<SeriesPoint> normalize_dataset(const Dataset& train, const NormalizationStats& stats);

// Smoothed minimum: -gamma log(e^{-a/g} + e^{-b/g} + e^{-c/g}), shifted for
// stability; tends to min(a,b,c) as gamma -> 0.
double softmin(double a, double b, double c, double gamma);

// Soft dynamic time warping score between two 2-channel series with squared
// Euclidean ground cost.
double sdtw(const Series& x, const Series& y, double gamma);

// d sdtw(x,y) / d x via the soft-alignment backward pass.
Series sdtw_gradient(const Series& x, const Series& y, double gamma);

// Gradient-descent barycenter of the members under sdtw, warm-started at
// init; the objective never increases across accepted steps.
Series sdtw_barycenter(const std::vector<Series>& members, double gamma, Series init,
                       int max_iter = 40, double tol = 1e-7);

struct KmeansConfig {
    double gamma = 1.0;
    unsigned long long seed = 0;
    int max_iter = 50;
    double tol = 1e-6;
};

struct Clustering {
    std::vector<int> assignments;  // point index -> cluster id
    std::vector<Series> centroids;
    double inertia = 0.0;  // sum over points of sdtw(point, assigned centroid)
    int S = 0;
    unsigned long long seed = 0;
    double gamma = 1.0;
};

// SDTW k-means: k-means++-style seeding, assignment to the nearest centroid
// (lowest id wins ties), barycenter updates, empty clusters reseeded from the
// farthest point. Deterministic for a fixed seed.
Clustering kmeans_sdtw(const std::vector<SeriesPoint>& points, int S, const KmeansConfig& cfg);

// 1 - SS_within/SS_total with squared Euclidean distance on the flattened
// normalized vectors (SDTW has no clean SS decomposition); all-identical
// points give 1 by convention.
double variance_captured(const std::vector<SeriesPoint>& points, const Clustering& clustering);

struct ElbowRow {
    int S = 0;
    double variance_captured = 0.0;
};

struct ElbowReport {
    std::vector<ElbowRow> rows;
    int chosen_S = 0;
    // Re-seeding noise the monotonicity of the table is guaranteed within.
    double noise_tolerance = 1e-9;
};

// Scan S over [s_min, s_max], several restarts per S plus a warm start from
// the previous best, and pick the elbow: the last S before the marginal
// variance gain first drops below threshold (the whole table is reported).
ElbowReport elbow_scan(const std::vector<SeriesPoint>& points, int s_min, int s_max,
                       const KmeansConfig& cfg, double threshold = 0.01, int restarts = 4,
                       std::vector<Clustering>* keep = nullptr);

struct Scenario {
    double probability = 0.0;
    std::vector<double> eta, lambda;  // physical units
};

struct ScenarioSet {
    int horizon = 0;
    std::vector<Scenario> scenarios;
};

// De-normalized centroids with probabilities N_w / N_D.
ScenarioSet build_scenario_set(const Dataset& training, const Clustering& clustering,
                               const NormalizationStats& stats);

ScenarioSet load_scenario_set(const std::string& path);
void save_scenario_set(const ScenarioSet& set, const std::string& path);

inline DailyProfile scenario_profile(const Scenario& s) {
    DailyProfile p;
    p.eta = s.eta;
    p.lambda = s.lambda;
    return p;
}

}  // namespace drouc
