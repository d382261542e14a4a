#include "drouc/market_data.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "drouc/errors.hpp"

namespace drouc {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double parse_number(const std::string& raw, const std::string& what, std::size_t line_no) {
    std::string s = trim(raw);
    if (s.empty())
        throw schema_error("line " + std::to_string(line_no) + ": empty " + what + " field");
    errno = 0;
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v))
        throw schema_error("line " + std::to_string(line_no) + ": non-numeric " + what + " value '" +
                           s + "'");
    return v;
}

long parse_int(const std::string& raw, const std::string& what, std::size_t line_no) {
    std::string s = trim(raw);
    if (s.empty())
        throw schema_error("line " + std::to_string(line_no) + ": empty " + what + " field");
    errno = 0;
    char* end = nullptr;
    long v = std::strtol(s.c_str(), &end, 10);
    if (end != s.c_str() + s.size() || errno == ERANGE)
        throw schema_error("line " + std::to_string(line_no) + ": non-integer " + what + " value '" +
                           s + "'");
    return v;
}

}  // namespace

Dataset load_profiles(const std::string& path, const CsvSchema& schema, int horizon,
                      bool allow_negative_prices) {
    if (horizon < 1) throw std::invalid_argument("horizon must be positive");
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw schema_error(path + ": empty file");
    std::vector<std::string> header = split_csv_line(line);
    for (auto& h : header) h = trim(h);
    auto col = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw schema_error(path + ": missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t c_date = col(schema.date), c_hour = col(schema.hour);
    const std::size_t c_load = col(schema.load), c_pv = col(schema.pv);
    const std::size_t c_price = col(schema.price);

    struct DayAccum {
        std::vector<double> eta, lambda;
        std::vector<char> seen;
    };
    std::map<Date, DayAccum> days;
    std::size_t line_no = 1, rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        std::vector<std::string> f = split_csv_line(line);
        if (f.size() != header.size())
            throw schema_error("line " + std::to_string(line_no) + ": expected " +
                               std::to_string(header.size()) + " fields, got " +
                               std::to_string(f.size()));
        Date d;
        try {
            d = parse_date(trim(f[c_date]));
        } catch (const std::invalid_argument& e) {
            throw schema_error("line " + std::to_string(line_no) + ": " + e.what());
        }
        long hour = parse_int(f[c_hour], "hour", line_no);
        if (hour < 0 || hour >= horizon)
            throw schema_error("line " + std::to_string(line_no) + ": hour " +
                               std::to_string(hour) + " outside 0.." + std::to_string(horizon - 1));
        double load = parse_number(f[c_load], "load", line_no);
        double pv = parse_number(f[c_pv], "pv", line_no);
        double price = parse_number(f[c_price], "price", line_no);
        if (load < 0.0)
            throw schema_error("line " + std::to_string(line_no) + ": negative load");
        if (pv < 0.0)
            throw schema_error("line " + std::to_string(line_no) + ": negative pv");
        if (price < 0.0 && !allow_negative_prices)
            throw schema_error("line " + std::to_string(line_no) +
                               ": negative price (allowed only with a finite purchase limit)");

        DayAccum& acc = days[d];
        if (acc.seen.empty()) {
            acc.eta.assign(horizon, 0.0);
            acc.lambda.assign(horizon, 0.0);
            acc.seen.assign(horizon, 0);
        }
        if (acc.seen[hour])
            throw schema_error("line " + std::to_string(line_no) + ": duplicate hour " +
                               std::to_string(hour) + " on " + d.to_string());
        acc.seen[hour] = 1;
        acc.eta[hour] = load - pv;
        acc.lambda[hour] = price / 1000.0;
        ++rows;
    }
    if (rows == 0) throw schema_error(path + ": no data rows");

    Dataset out;
    out.horizon = horizon;
    for (auto& [date, acc] : days) {
        for (int h = 0; h < horizon; ++h)
            if (!acc.seen[h])
                throw schema_error("incomplete day " + date.to_string() + ": missing hour " +
                                   std::to_string(h));
        out.profiles.push_back({date, std::move(acc.eta), std::move(acc.lambda)});
    }
    return out;  // std::map iteration already sorted by date
}

Dataset apply_surcharge(const Dataset& dataset, double surcharge_per_mwh) {
    if (surcharge_per_mwh < 0.0) throw std::invalid_argument("negative surcharge");
    Dataset out = dataset;
    if (surcharge_per_mwh == 0.0) return out;
    // Add at the MWh scale: storage is a price_mwh column, and fl(x/1000)
    // skips ~2% of doubles per binade, so sums formed at the kWh scale can
    // land on values no CSV field encodes.
    for (auto& p : out.profiles)
        for (auto& l : p.lambda) l = (l * 1000.0 + surcharge_per_mwh) / 1000.0;
    return out;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, const Date& boundary) {
    Dataset train, test;
    train.horizon = test.horizon = dataset.horizon;
    for (const auto& p : dataset.profiles)
        (p.date < boundary ? train : test).profiles.push_back(p);
    if (train.profiles.empty()) throw std::invalid_argument("empty train split");
    if (test.profiles.empty()) throw std::invalid_argument("empty test split");
    return {std::move(train), std::move(test)};
}

namespace {

// Shortest decimal that survives the strtod -> /1000 -> storage round trip.
// The /1000 rounding can land a naive 17-digit print one ulp off, so nudge.
std::string price_field(double lambda) {
    auto render = [](double mwh) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", mwh);
        return std::string(buf);
    };
    auto reparses = [&](const std::string& s) {
        return std::strtod(s.c_str(), nullptr) / 1000.0 == lambda;
    };
    double mwh = lambda * 1000.0;
    std::string s = render(mwh);
    if (reparses(s)) return s;
    double up = mwh, dn = mwh;
    for (int k = 0; k < 64; ++k) {
        up = std::nextafter(up, std::numeric_limits<double>::infinity());
        s = render(up);
        if (reparses(s)) return s;
        dn = std::nextafter(dn, -std::numeric_limits<double>::infinity());
        s = render(dn);
        if (reparses(s)) return s;
    }
    throw std::logic_error("cannot find a round-trippable price encoding");
}

std::string load_field(double eta) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", eta);
    return std::string(buf);
}

}  // namespace

void write_profiles(const Dataset& dataset, const std::string& path, const CsvSchema& schema) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path);
    out << schema.date << ',' << schema.hour << ',' << schema.load << ',' << schema.pv << ','
        << schema.price << '\n';
    for (const auto& p : dataset.profiles)
        for (int h = 0; h < dataset.horizon; ++h) {
            // load >= 0 is enforced on ingestion, so negative net load is
            // encoded on the pv side; negation is exact.
            double eta = p.eta[h];
            out << p.date.to_string() << ',' << h << ',';
            if (eta >= 0.0)
                out << load_field(eta) << ",0,";
            else
                out << "0," << load_field(-eta) << ',';
            out << price_field(p.lambda[h]) << '\n';
        }
    if (!out) throw io_error("write failed for " + path);
}

}  // namespace drouc
