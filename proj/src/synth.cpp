#include "drouc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace drouc {

// Draw order is fixed (per day: regime, pv peak, spike flag, then per hour
// load/price noise) so a given seed always yields the same dataset.
Dataset synth_dataset(const SynthConfig& cfg) {
    if (cfg.days < 1 || cfg.horizon < 1) throw std::invalid_argument("synth: days and horizon must be positive");
    std::mt19937_64 gen(cfg.seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const double pi = 3.14159265358979323846;
    const int H = cfg.horizon;
    Dataset ds;
    ds.horizon = H;
    Date d = cfg.start;
    for (int day = 0; day < cfg.days; ++day) {
        DailyProfile p;
        p.date = d;
        p.eta.resize(H);
        p.lambda.resize(H);
        double regime = (unit(gen) < 0.35) ? 1.0 : 0.0;  // hot day: more load, dearer evenings
        double pv_peak = 1.0 + 2.8 * unit(gen);
        bool spike = unit(gen) < cfg.spike_prob;
        for (int h = 0; h < H; ++h) {
            double t = 2.0 * pi * h / H;
            // slot h covers calendar hour 24h/H, so the solar and spike
            // windows stay in place when the horizon is coarser than hourly
            double frac = 24.0 * h / H;
            double load = 3.2 + 1.1 * std::sin(t - 0.75 * pi) + 0.8 * regime + 0.25 * noise(gen);
            load = std::max(0.0, load * cfg.load_scale);
            double pv = pv_peak * std::max(0.0, std::sin(pi * (frac - 6.0) / 12.0));
            if (frac < 6.0 || frac > 18.0) pv = 0.0;
            p.eta[h] = load - pv;

            double price = 42.0 + 18.0 * std::sin(t - 0.8 * pi) + 6.0 * regime + 3.0 * noise(gen);
            if (spike && frac >= 17.0 && frac <= 20.0) price += 180.0 * cfg.spike_scale;
            price = std::max(0.5, price * cfg.price_scale);
            p.lambda[h] = price / 1000.0;
        }
        ds.profiles.push_back(std::move(p));
        d = next_day(d);
    }
    return ds;
}

}  // namespace drouc
