#include "drouc/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <stdexcept>

#include "drouc/errors.hpp"
#include "json.hpp"

namespace drouc {

namespace {
constexpr double kInfd = std::numeric_limits<double>::infinity();

double sq_dist(const std::array<double, 2>& a, const std::array<double, 2>& b) {
    double d0 = a[0] - b[0], d1 = a[1] - b[1];
    return d0 * d0 + d1 * d1;
}
}  // namespace

NormalizationStats normalization_stats(const Dataset& train) {
    if (train.profiles.empty()) throw std::invalid_argument("empty training dataset");
    NormalizationStats st;
    double n = 0.0, se = 0.0, sl = 0.0;
    for (const auto& p : train.profiles)
        for (int h = 0; h < train.horizon; ++h) {
            se += p.eta[h];
            sl += p.lambda[h];
            n += 1.0;
        }
    st.eta_mean = se / n;
    st.lambda_mean = sl / n;
    double ve = 0.0, vl = 0.0;
    for (const auto& p : train.profiles)
        for (int h = 0; h < train.horizon; ++h) {
            ve += (p.eta[h] - st.eta_mean) * (p.eta[h] - st.eta_mean);
            vl += (p.lambda[h] - st.lambda_mean) * (p.lambda[h] - st.lambda_mean);
        }
    st.eta_std = std::sqrt(ve / n);
    st.lambda_std = std::sqrt(vl / n);
    if (st.eta_std == 0.0) st.eta_std = 1.0;  // constant channel: pass through centered
    if (st.lambda_std == 0.0) st.lambda_std = 1.0;
    return st;
}

std::vector<SeriesPoint> normalize_dataset(const Dataset& train, const NormalizationStats& st) {
    std::vector<SeriesPoint> out;
    out.reserve(train.profiles.size());
    for (const auto& p : train.profiles) {
        SeriesPoint sp;
        sp.source_date = p.date;
        sp.values.resize(train.horizon);
        for (int h = 0; h < train.horizon; ++h) {
            sp.values[h][0] = (p.eta[h] - st.eta_mean) / st.eta_std;
            sp.values[h][1] = (p.lambda[h] - st.lambda_mean) / st.lambda_std;
        }
        out.push_back(std::move(sp));
    }
    return out;
}

double softmin(double a, double b, double c, double gamma) {
    if (!(gamma > 0.0)) throw std::invalid_argument("softmin needs gamma > 0");
    double m = std::min({a, b, c});
    if (!std::isfinite(m)) return m;
    double s = std::exp(-(a - m) / gamma) + std::exp(-(b - m) / gamma) +
               std::exp(-(c - m) / gamma);
    return m - gamma * std::log(s);
}

double sdtw(const Series& x, const Series& y, double gamma) {
    if (x.empty() || y.empty()) throw std::invalid_argument("sdtw of an empty series");
    if (!(gamma > 0.0)) throw std::invalid_argument("sdtw needs gamma > 0");
    const std::size_t n = x.size(), m = y.size();
    std::vector<std::vector<double>> r(n + 1, std::vector<double>(m + 1, kInfd));
    r[0][0] = 0.0;
    for (std::size_t i = 1; i <= n; ++i)
        for (std::size_t j = 1; j <= m; ++j)
            r[i][j] = sq_dist(x[i - 1], y[j - 1]) +
                      softmin(r[i - 1][j], r[i][j - 1], r[i - 1][j - 1], gamma);
    return r[n][m];
}

Series sdtw_gradient(const Series& x, const Series& y, double gamma) {
    if (x.empty() || y.empty()) throw std::invalid_argument("sdtw of an empty series");
    if (!(gamma > 0.0)) throw std::invalid_argument("sdtw needs gamma > 0");
    const std::size_t n = x.size(), m = y.size();

    // forward pass, padded one row/column beyond the grid for the backward
    std::vector<std::vector<double>> r(n + 2, std::vector<double>(m + 2, kInfd));
    std::vector<std::vector<double>> d(n + 2, std::vector<double>(m + 2, 0.0));
    r[0][0] = 0.0;
    for (std::size_t i = 1; i <= n; ++i)
        for (std::size_t j = 1; j <= m; ++j) {
            d[i][j] = sq_dist(x[i - 1], y[j - 1]);
            r[i][j] = d[i][j] + softmin(r[i - 1][j], r[i][j - 1], r[i - 1][j - 1], gamma);
        }

    // soft-alignment expectations (Cuturi-Blondel backward recursion)
    for (std::size_t i = 1; i <= n; ++i) r[i][m + 1] = -kInfd;
    for (std::size_t j = 1; j <= m; ++j) r[n + 1][j] = -kInfd;
    r[n + 1][m + 1] = r[n][m];
    auto weight = [&](double num) {
        // num = R[next] - R[here] - d[next]; exp((-inf or NaN)) counts as 0
        if (!std::isfinite(num)) return 0.0;
        return std::exp(num / gamma);
    };
    std::vector<std::vector<double>> e(n + 2, std::vector<double>(m + 2, 0.0));
    e[n + 1][m + 1] = 1.0;
    for (std::size_t i = n; i >= 1; --i)
        for (std::size_t j = m; j >= 1; --j) {
            if (!std::isfinite(r[i][j])) continue;
            double a = weight(r[i + 1][j] - r[i][j] - d[i + 1][j]);
            double b = weight(r[i][j + 1] - r[i][j] - d[i][j + 1]);
            double c = weight(r[i + 1][j + 1] - r[i][j] - d[i + 1][j + 1]);
            e[i][j] = a * e[i + 1][j] + b * e[i][j + 1] + c * e[i + 1][j + 1];
        }

    Series g(n, {0.0, 0.0});
    for (std::size_t i = 1; i <= n; ++i)
        for (std::size_t j = 1; j <= m; ++j) {
            if (e[i][j] == 0.0) continue;
            g[i - 1][0] += e[i][j] * 2.0 * (x[i - 1][0] - y[j - 1][0]);
            g[i - 1][1] += e[i][j] * 2.0 * (x[i - 1][1] - y[j - 1][1]);
        }
    return g;
}

Series sdtw_barycenter(const std::vector<Series>& members, double gamma, Series init,
                       int max_iter, double tol) {
    if (members.empty()) throw std::invalid_argument("barycenter of an empty member list");
    const std::size_t H = init.size();
    for (const auto& m : members)
        if (m.size() != H) throw std::invalid_argument("barycenter members must share the shape");

    auto objective = [&](const Series& c) {
        double s = 0.0;
        for (const auto& m : members) s += sdtw(c, m, gamma);
        return s;
    };

    Series c = std::move(init);
    double fc = objective(c);
    for (int it = 0; it < max_iter; ++it) {
        Series g(H, {0.0, 0.0});
        for (const auto& m : members) {
            Series gm = sdtw_gradient(c, m, gamma);
            for (std::size_t h = 0; h < H; ++h) {
                g[h][0] += gm[h][0];
                g[h][1] += gm[h][1];
            }
        }
        double gnorm2 = 0.0;
        for (const auto& gh : g) gnorm2 += gh[0] * gh[0] + gh[1] * gh[1];
        if (gnorm2 <= tol * tol) break;

        double t = 1.0 / (4.0 * static_cast<double>(members.size()));
        bool accepted = false;
        for (int k = 0; k < 40; ++k, t *= 0.5) {
            Series trial = c;
            for (std::size_t h = 0; h < H; ++h) {
                trial[h][0] -= t * g[h][0];
                trial[h][1] -= t * g[h][1];
            }
            double ft = objective(trial);
            if (ft <= fc - 1e-4 * t * gnorm2) {
                c = std::move(trial);
                fc = ft;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
        if (t * std::sqrt(gnorm2) <= tol) break;
    }
    return c;
}

namespace {

// Lloyd iterations from given initial centroids; shared by the seeded entry
// point and the elbow scan's warm starts.
Clustering lloyd(const std::vector<SeriesPoint>& points, int S, const KmeansConfig& cfg,
                 std::vector<Series> centroids) {
    const int N = static_cast<int>(points.size());
    Clustering cl;
    cl.S = S;
    cl.seed = cfg.seed;
    cl.gamma = cfg.gamma;
    cl.centroids = std::move(centroids);
    cl.assignments.assign(N, -1);

    std::vector<double> dist_to_own(N, 0.0);
    for (int iter = 0; iter < std::max(1, cfg.max_iter); ++iter) {
        bool changed = false;
        for (int i = 0; i < N; ++i) {
            int best = 0;
            double best_d = kInfd;
            for (int k = 0; k < S; ++k) {
                double d = sdtw(points[i].values, cl.centroids[k], cfg.gamma);
                if (d < best_d) {  // strict: ties keep the lowest id
                    best_d = d;
                    best = k;
                }
            }
            if (best != cl.assignments[i]) changed = true;
            cl.assignments[i] = best;
            dist_to_own[i] = best_d;
        }

        std::vector<int> count(S, 0);
        for (int i = 0; i < N; ++i) ++count[cl.assignments[i]];
        for (int k = 0; k < S; ++k) {
            if (count[k] > 0) continue;
            int far = -1;
            double far_d = -kInfd;
            for (int i = 0; i < N; ++i)
                if (count[cl.assignments[i]] > 1 && dist_to_own[i] > far_d) {
                    far_d = dist_to_own[i];
                    far = i;
                }
            if (far < 0) break;  // fewer distinct points than clusters
            --count[cl.assignments[far]];
            cl.centroids[k] = points[far].values;
            cl.assignments[far] = k;
            count[k] = 1;
            dist_to_own[far] = sdtw(points[far].values, cl.centroids[k], cfg.gamma);
            changed = true;
        }

        if (!changed && iter > 0) break;

        for (int k = 0; k < S; ++k) {
            std::vector<Series> members;
            for (int i = 0; i < N; ++i)
                if (cl.assignments[i] == k) members.push_back(points[i].values);
            if (!members.empty())
                cl.centroids[k] = sdtw_barycenter(members, cfg.gamma, cl.centroids[k]);
        }
    }

    // final assignment so inertia is consistent with the reported centroids
    cl.inertia = 0.0;
    for (int i = 0; i < N; ++i) {
        int best = 0;
        double best_d = kInfd;
        for (int k = 0; k < S; ++k) {
            double d = sdtw(points[i].values, cl.centroids[k], cfg.gamma);
            if (d < best_d) {
                best_d = d;
                best = k;
            }
        }
        cl.assignments[i] = best;
        cl.inertia += best_d;
    }
    // a final reassignment can in principle empty a cluster; put the farthest
    // point back so the non-empty invariant always holds
    std::vector<int> count(S, 0);
    for (int i = 0; i < N; ++i) ++count[cl.assignments[i]];
    for (int k = 0; k < S; ++k) {
        if (count[k] > 0) continue;
        int far = -1;
        double far_d = -kInfd;
        for (int i = 0; i < N; ++i) {
            double d = sdtw(points[i].values, cl.centroids[cl.assignments[i]], cfg.gamma);
            if (count[cl.assignments[i]] > 1 && d > far_d) {
                far_d = d;
                far = i;
            }
        }
        if (far < 0) break;
        --count[cl.assignments[far]];
        cl.centroids[k] = points[far].values;
        cl.assignments[far] = k;
        count[k] = 1;
    }
    cl.inertia = 0.0;
    for (int i = 0; i < N; ++i)
        cl.inertia += sdtw(points[i].values, cl.centroids[cl.assignments[i]], cfg.gamma);
    return cl;
}

std::vector<Series> kmeanspp_seed(const std::vector<SeriesPoint>& points, int S,
                                  const KmeansConfig& cfg) {
    const int N = static_cast<int>(points.size());
    std::mt19937_64 gen(cfg.seed);
    std::vector<Series> centroids;
    centroids.push_back(points[gen() % N].values);
    std::vector<double> dist(N);
    for (int i = 0; i < N; ++i) dist[i] = sdtw(points[i].values, centroids[0], cfg.gamma);
    while (static_cast<int>(centroids.size()) < S) {
        double total = 0.0;
        for (int i = 0; i < N; ++i) total += std::max(dist[i], 0.0);
        int pick;
        if (total <= 0.0) {
            pick = static_cast<int>(gen() % N);
        } else {
            double r = std::uniform_real_distribution<double>(0.0, total)(gen);
            pick = N - 1;
            double acc = 0.0;
            for (int i = 0; i < N; ++i) {
                acc += std::max(dist[i], 0.0);
                if (r <= acc) {
                    pick = i;
                    break;
                }
            }
        }
        centroids.push_back(points[pick].values);
        for (int i = 0; i < N; ++i)
            dist[i] = std::min(dist[i], sdtw(points[i].values, centroids.back(), cfg.gamma));
    }
    return centroids;
}

void check_points(const std::vector<SeriesPoint>& points) {
    if (points.empty()) throw std::invalid_argument("no points to cluster");
    const std::size_t H = points[0].values.size();
    if (H == 0) throw std::invalid_argument("zero-length series");
    for (const auto& p : points) {
        if (p.values.size() != H) throw std::invalid_argument("points must share the horizon");
        for (const auto& v : p.values)
            if (!std::isfinite(v[0]) || !std::isfinite(v[1]))
                throw std::invalid_argument("non-finite series entry");
    }
}

}  // namespace

Clustering kmeans_sdtw(const std::vector<SeriesPoint>& points, int S, const KmeansConfig& cfg) {
    check_points(points);
    const int N = static_cast<int>(points.size());
    if (S < 1) throw std::invalid_argument("S must be at least 1");
    if (S > N) throw std::invalid_argument("S exceeds the number of points");
    if (!(cfg.gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
    return lloyd(points, S, cfg, kmeanspp_seed(points, S, cfg));
}

double variance_captured(const std::vector<SeriesPoint>& points, const Clustering& clustering) {
    check_points(points);
    const int N = static_cast<int>(points.size());
    if (static_cast<int>(clustering.assignments.size()) != N)
        throw std::invalid_argument("clustering does not cover the points");
    const std::size_t H = points[0].values.size();

    std::vector<double> mean(2 * H, 0.0);
    for (const auto& p : points)
        for (std::size_t h = 0; h < H; ++h) {
            mean[2 * h] += p.values[h][0];
            mean[2 * h + 1] += p.values[h][1];
        }
    for (auto& m : mean) m /= N;

    double ss_total = 0.0, ss_within = 0.0;
    for (int i = 0; i < N; ++i) {
        const Series& c = clustering.centroids.at(clustering.assignments[i]);
        if (c.size() != H) throw std::invalid_argument("centroid shape mismatch");
        for (std::size_t h = 0; h < H; ++h) {
            double d0 = points[i].values[h][0] - mean[2 * h];
            double d1 = points[i].values[h][1] - mean[2 * h + 1];
            ss_total += d0 * d0 + d1 * d1;
            double w0 = points[i].values[h][0] - c[h][0];
            double w1 = points[i].values[h][1] - c[h][1];
            ss_within += w0 * w0 + w1 * w1;
        }
    }
    if (ss_total == 0.0) return 1.0;
    // SDTW centroids are not Euclidean means, so clamp the stray cases
    return std::clamp(1.0 - ss_within / ss_total, 0.0, 1.0);
}

ElbowReport elbow_scan(const std::vector<SeriesPoint>& points, int s_min, int s_max,
                       const KmeansConfig& cfg, double threshold, int restarts,
                       std::vector<Clustering>* keep) {
    check_points(points);
    const int N = static_cast<int>(points.size());
    if (s_min < 1 || s_max < s_min || s_max > N)
        throw std::invalid_argument("elbow range must satisfy 1 <= s_min <= s_max <= N");
    if (restarts < 1) throw std::invalid_argument("need at least one restart");

    ElbowReport report;
    if (keep) keep->clear();
    const Clustering* prev = nullptr;
    std::vector<Clustering> kept;
    for (int S = s_min; S <= s_max; ++S) {
        Clustering best;
        bool have = false;
        for (int r = 0; r < restarts; ++r) {
            KmeansConfig c = cfg;
            c.seed = cfg.seed ^ (0x9E3779B97F4A7C15ULL * static_cast<unsigned long long>(r + 1));
            Clustering cand = kmeans_sdtw(points, S, c);
            if (!have || cand.inertia < best.inertia) {
                best = std::move(cand);
                have = true;
            }
        }
        if (prev && prev->S == S - 1) {
            // warm start: previous centroids plus the farthest point keeps the
            // k-means objective non-increasing in S
            std::vector<Series> init = prev->centroids;
            int far = 0;
            double far_d = -kInfd;
            for (int i = 0; i < N; ++i) {
                double d = sdtw(points[i].values, prev->centroids[prev->assignments[i]], cfg.gamma);
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            init.push_back(points[far].values);
            Clustering cand = lloyd(points, S, cfg, std::move(init));
            if (cand.inertia < best.inertia) best = std::move(cand);
        }
        report.rows.push_back({S, variance_captured(points, best)});
        kept.push_back(std::move(best));
        prev = &kept.back();
    }

    // elbow: the last S that still delivered at least the threshold gain
    report.chosen_S = report.rows.back().S;
    for (std::size_t i = 1; i < report.rows.size(); ++i) {
        double gain = report.rows[i].variance_captured - report.rows[i - 1].variance_captured;
        if (gain < threshold) {
            report.chosen_S = report.rows[i - 1].S;
            break;
        }
    }
    if (keep) *keep = std::move(kept);
    return report;
}

ScenarioSet build_scenario_set(const Dataset& training, const Clustering& clustering,
                               const NormalizationStats& stats) {
    const int N = static_cast<int>(training.profiles.size());
    if (static_cast<int>(clustering.assignments.size()) != N)
        throw std::invalid_argument("clustering was not produced from this dataset");
    std::vector<int> count(clustering.S, 0);
    for (int a : clustering.assignments) {
        if (a < 0 || a >= clustering.S) throw std::invalid_argument("assignment out of range");
        ++count[a];
    }
    ScenarioSet set;
    set.horizon = training.horizon;
    for (int k = 0; k < clustering.S; ++k) {
        if (count[k] == 0) throw std::logic_error("empty cluster reached scenario construction");
        Scenario s;
        s.probability = static_cast<double>(count[k]) / static_cast<double>(N);
        const Series& c = clustering.centroids[k];
        if (static_cast<int>(c.size()) != training.horizon)
            throw std::invalid_argument("centroid horizon mismatch");
        s.eta.resize(training.horizon);
        s.lambda.resize(training.horizon);
        for (int h = 0; h < training.horizon; ++h) {
            s.eta[h] = c[h][0] * stats.eta_std + stats.eta_mean;
            s.lambda[h] = c[h][1] * stats.lambda_std + stats.lambda_mean;
        }
        set.scenarios.push_back(std::move(s));
    }
    return set;
}

ScenarioSet load_scenario_set(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw schema_error(path + ": " + e.what());
    }
    ScenarioSet set;
    try {
        set.horizon = j.at("horizon").get<int>();
        for (const auto& js : j.at("scenarios")) {
            Scenario s;
            s.probability = js.at("probability").get<double>();
            s.eta = js.at("eta").get<std::vector<double>>();
            s.lambda = js.at("lambda").get<std::vector<double>>();
            set.scenarios.push_back(std::move(s));
        }
    } catch (const nlohmann::json::exception& e) {
        throw schema_error(path + ": " + e.what());
    }
    if (set.horizon < 1) throw schema_error(path + ": horizon must be >= 1");
    if (set.scenarios.empty()) throw schema_error(path + ": no scenarios");
    double total = 0.0;
    for (const auto& s : set.scenarios) {
        if (!(s.probability > 0.0))
            throw schema_error(path + ": scenario probabilities must be positive");
        if (static_cast<int>(s.eta.size()) != set.horizon ||
            static_cast<int>(s.lambda.size()) != set.horizon)
            throw schema_error(path + ": scenario arrays must match the horizon");
        total += s.probability;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw schema_error(path + ": probabilities sum to " + std::to_string(total));
    return set;
}

void save_scenario_set(const ScenarioSet& set, const std::string& path) {
    nlohmann::json j;
    j["horizon"] = set.horizon;
    j["scenarios"] = nlohmann::json::array();
    for (const auto& s : set.scenarios) {
        nlohmann::json js;
        js["probability"] = s.probability;
        js["eta"] = s.eta;
        js["lambda"] = s.lambda;
        j["scenarios"].push_back(std::move(js));
    }
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path);
    out << j.dump(2) << '\n';
    if (!out) throw io_error("write failed for " + path);
}

}  // namespace drouc
