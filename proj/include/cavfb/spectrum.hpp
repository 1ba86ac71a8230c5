#ifndef CAVFB_SPECTRUM_HPP
#define CAVFB_SPECTRUM_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cavfb/error.hpp"

namespace cavfb
{
// One labeled real-valued channel sampled on the spectrum's grid. Complex data
// are carried as two channels, "<label>_re" and "<label>_im".
struct Channel
{
    std::string label;
    std::vector<double> values;
    std::vector<double> sigma;  // empty when no uncertainty is attached
};

// Frequency grid (rad/s) plus labeled channels. Universal payload for sweeps,
// fits and file I/O.
struct Spectrum
{
    std::vector<double> omega;
    std::vector<Channel> channels;
    std::vector<std::string> warnings;

    std::size_t size() const noexcept { return omega.size(); }

    Channel& add_channel(std::string label, std::vector<double> values = {})
    {
        if (values.empty()) values.assign(omega.size(), 0.0);
        require(values.size() == omega.size(), "channel '" + label + "' length does not match grid");
        channels.push_back(Channel{std::move(label), std::move(values), {}});
        return channels.back();
    }

    const Channel* find(const std::string& label) const
    {
        auto it = std::find_if(channels.begin(), channels.end(),
                               [&](const Channel& c) { return c.label == label; });
        return it == channels.end() ? nullptr : &*it;
    }

    const Channel& channel(const std::string& label) const
    {
        if (const Channel* c = find(label)) return *c;
        fail(ErrorCategory::invalid_argument, "spectrum has no channel '" + label + "'");
    }

    void validate() const
    {
        for (std::size_t i = 1; i < omega.size(); ++i)
            require(omega[i] > omega[i - 1], "spectrum grid must be strictly increasing");
        for (const auto& c : channels) {
            require(c.values.size() == omega.size(), "channel '" + c.label + "' length mismatch");
            require(c.sigma.empty() || c.sigma.size() == omega.size(),
                    "channel '" + c.label + "' uncertainty length mismatch");
        }
    }
};

// Grid specification: start, stop (rad/s), number of points, spacing.
struct GridSpec
{
    double start = 0.0;
    double stop = 0.0;
    std::size_t points = 0;
    bool log = false;
};

inline std::vector<double> make_grid(const GridSpec& g)
{
    require(g.points >= 1, "grid needs at least one point");
    require(g.points == 1 || g.stop > g.start, "grid stop must exceed start");
    if (g.log) require(g.start > 0.0, "log grid requires a positive start");
    std::vector<double> out(g.points);
    if (g.points == 1) {
        out[0] = g.start;
        return out;
    }
    const double n = static_cast<double>(g.points - 1);
    for (std::size_t i = 0; i < g.points; ++i) {
        const double t = static_cast<double>(i) / n;
        out[i] = g.log ? g.start * std::pow(g.stop / g.start, t) : g.start + (g.stop - g.start) * t;
    }
    // Pin the endpoints exactly.
    out.front() = g.start;
    out.back() = g.stop;
    return out;
}

inline std::vector<double> linspace(double start, double stop, std::size_t points)
{
    return make_grid(GridSpec{start, stop, points, false});
}

inline std::vector<double> logspace(double start, double stop, std::size_t points)
{
    return make_grid(GridSpec{start, stop, points, true});
}

}  // namespace cavfb

#endif  // CAVFB_SPECTRUM_HPP
