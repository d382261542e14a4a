#pragma once

#include <string>
#include <utility>
#include <vector>

#include "drouc/dates.hpp"

namespace drouc {

// One historical day: hourly net load (kW) and price ($/kWh). Prices arrive
// from CSV in $/MWh and are divided by 1000 on ingestion so that cost = lambda
// times kW over one hour without further conversion.
struct DailyProfile {
    Date date;
    std::vector<double> eta;
    std::vector<double> lambda;
};

struct Dataset {
    std::vector<DailyProfile> profiles;
    int horizon = 24;
};

// Column-name mapping for ingestion; defaults match the documented layout.
struct CsvSchema {
    std::string date = "date";
    std::string hour = "hour";
    std::string load = "load_kw";
    std::string pv = "pv_kw";
    std::string price = "price_mwh";
};

// Parse an hourly CSV into daily profiles. Every day must cover hours
// 0..horizon-1 exactly once; eta[h] = load[h] - pv[h]. Negative prices are
// rejected unless allow_negative_prices is set (they make the dispatch LP
// unbounded without a purchase limit).
Dataset load_profiles(const std::string& path, const CsvSchema& schema = {}, int horizon = 24,
                      bool allow_negative_prices = false);

// Add a retail surcharge, given in $/MWh, to every price entry.
Dataset apply_surcharge(const Dataset& dataset, double surcharge_per_mwh);

// Train/test split: train holds days strictly before the boundary.
std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, const Date& boundary);

// Inverse of load_profiles for derived datasets: emits load = eta, pv = 0 and
// a price string chosen so reloading reproduces each double bit-for-bit.
void write_profiles(const Dataset& dataset, const std::string& path, const CsvSchema& schema = {});

}  // namespace drouc
