#pragma once

#include "drouc/market_data.hpp"

namespace drouc {

// Deterministic synthetic market data: a residential-style net-load shape
// (evening peak, midday PV dip) and a correlated price curve, with occasional
// evening price-spike days. spike_prob/spike_scale are the knobs a shifted
// out-of-sample distribution is built from.
struct SynthConfig {
    int days = 92;
    int horizon = 24;
    Date start{2019, 6, 1};
    unsigned long long seed = 1;
    double load_scale = 1.0;
    double price_scale = 1.0;
    double spike_prob = 0.08;
    double spike_scale = 1.0;
};

Dataset synth_dataset(const SynthConfig& cfg);

}  // namespace drouc
