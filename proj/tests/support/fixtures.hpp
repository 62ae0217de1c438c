#pragma once

#include "cob/ingest.hpp"
#include "cob/regime.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

namespace fixture {

// Weekly prices whose percent changes are a simulated two-regime path.
struct SyntheticPrices {
    cob::PriceSeries prices;
    cob::Simulation sim;
};

inline cob::RegimeParams two_regime_params() {
    cob::RegimeParams p{Eigen::MatrixXd(2, 2), Eigen::VectorXd(2), 0.1};
    p.transition << 0.97, 0.03, 0.05, 0.95;
    p.sigma << 1.0, 4.0;
    return p;
}

inline SyntheticPrices synthetic_prices(const cob::RegimeParams& p, std::size_t returns, std::uint64_t seed) {
    SyntheticPrices out{{}, cob::simulate(p, returns, seed)};
    out.prices.frequency = cob::Frequency::daily;  // one trading day per week
    out.prices.asset_id = "SYN";
    double level = 50.0;
    out.prices.dates.push_back(out.sim.returns.dates.front().plus_days(-7));
    out.prices.prices.push_back(level);
    for (std::size_t t = 0; t < returns; ++t) {
        level *= 1.0 + out.sim.returns.values[t] / 100.0;
        out.prices.dates.push_back(out.sim.returns.dates[t]);
        out.prices.prices.push_back(level);
    }
    return out;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("cob_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace fixture
