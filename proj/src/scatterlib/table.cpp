#include "qsi/scatterlib/table.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "qsi/core/constants.hpp"
#include "qsi/core/errors.hpp"

namespace qsi::scatter
{
PhaseShiftTable::PhaseShiftTable(std::vector<double> k_grid,
                                 std::vector<std::vector<double>> delta)
    : k_grid_(std::move(k_grid)), delta_(std::move(delta))
{
    if (k_grid_.empty())
        throw ParameterError("phase-shift table: empty k grid");
    if (delta_.empty())
        throw ParameterError("phase-shift table: needs at least the s wave");
    for (std::size_t i = 0; i < k_grid_.size(); ++i)
    {
        if (!(k_grid_[i] > 0) || !std::isfinite(k_grid_[i]))
            throw ParameterError("phase-shift table: k must be positive and finite");
        if (i > 0 && !(k_grid_[i] > k_grid_[i - 1]))
            throw ParameterError("phase-shift table: k grid must be strictly increasing");
    }
    for (std::size_t l = 0; l < delta_.size(); ++l)
    {
        auto const& row = delta_[l];
        if (row.size() != k_grid_.size())
            throw ParameterError("phase-shift table: row length differs from k grid");
        for (std::size_t i = 0; i < row.size(); ++i)
        {
            if (!std::isfinite(row[i]))
                throw ParameterError("phase-shift table: non-finite phase shift");
            if (i > 0 && std::abs(row[i] - row[i - 1]) >= max_step)
            {
                std::ostringstream msg;
                msg << "phase-shift table: l=" << l << " changes by "
                    << std::abs(row[i] - row[i - 1]) << " rad between k=" << k_grid_[i - 1]
                    << " and k=" << k_grid_[i] << " (grid too coarse)";
                throw ParameterError(msg.str());
            }
        }
    }
}

PhaseShiftTable PhaseShiftTable::constant(std::vector<double> const& delta_per_l,
                                          double k_lo,
                                          double k_hi)
{
    std::vector<std::vector<double>> rows;
    for (double d : delta_per_l)
        rows.push_back({d, d});
    return PhaseShiftTable({k_lo, k_hi}, std::move(rows));
}

bool PhaseShiftTable::covers(double k) const
{
    double const slack = 1e-12 * k_grid_.back();
    return k >= k_grid_.front() - slack && k <= k_grid_.back() + slack;
}

double PhaseShiftTable::delta(int l, double k) const
{
    if (l < 0 || l > l_max())
        throw RangeError("phase-shift table: partial wave out of range");
    if (!covers(k))
    {
        std::ostringstream msg;
        msg << "phase-shift table: k=" << k << " outside [" << k_grid_.front() << ", "
            << k_grid_.back() << "]";
        throw RangeError(msg.str());
    }
    auto const& row = delta_[l];
    if (k_grid_.size() == 1)
        return row.front();
    auto it = std::upper_bound(k_grid_.begin(), k_grid_.end(), k);
    std::size_t hi = std::clamp<std::size_t>(it - k_grid_.begin(), 1, k_grid_.size() - 1);
    std::size_t lo = hi - 1;
    double const t = std::clamp((k - k_grid_[lo]) / (k_grid_[hi] - k_grid_[lo]), 0.0, 1.0);
    return row[lo] + t * (row[hi] - row[lo]);
}

std::vector<double> PhaseShiftTable::deltas_at(double k) const
{
    std::vector<double> out(delta_.size());
    for (int l = 0; l <= l_max(); ++l)
        out[l] = delta(l, k);
    return out;
}

PhaseShiftTable build_phase_shift_table(Potential const& potential,
                                        std::vector<double> const& k_grid,
                                        int l_max,
                                        SolverOptions const& options)
{
    if (l_max < 0)
        throw ParameterError("build_phase_shift_table: l_max must be non-negative");
    std::vector<std::vector<double>> rows(l_max + 1, std::vector<double>(k_grid.size()));
    for (int l = 0; l <= l_max; ++l)
    {
        for (std::size_t i = 0; i < k_grid.size(); ++i)
        {
            double d = solve_phase_shift(potential, k_grid[i], l, options);
            if (i > 0)
            {
                // Continuity along k: choose the branch nearest the previous point
                double const prev = rows[l][i - 1];
                d += constants::pi * std::round((prev - d) / constants::pi);
            }
            rows[l][i] = d;
        }
    }
    return PhaseShiftTable(k_grid, std::move(rows));
}

void write_table_csv(std::ostream& os, PhaseShiftTable const& table)
{
    os << "k_per_m,l,delta_rad\n";
    char buf[96];
    for (int l = 0; l <= table.l_max(); ++l)
    {
        auto const row = table.row(l);
        for (std::size_t i = 0; i < row.size(); ++i)
        {
            std::snprintf(buf, sizeof buf, "%.17g,%d,%.17g\n", table.k_grid()[i], l, row[i]);
            os << buf;
        }
    }
}

PhaseShiftTable read_table_csv(std::istream& is)
{
    std::string line;
    // Skip leading comment lines
    while (std::getline(is, line) && (line.empty() || line[0] == '#'))
    {
    }
    if (line != "k_per_m,l,delta_rad")
        throw ParameterError("phase-shift CSV: expected header 'k_per_m,l,delta_rad'");
    std::map<int, std::vector<std::pair<double, double>>> rows;
    int lineno = 1;
    while (std::getline(is, line))
    {
        ++lineno;
        if (line.empty() || line[0] == '#')
            continue;
        std::istringstream ss(line);
        std::string a, b, c;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c))
            throw ParameterError("phase-shift CSV: malformed row " + std::to_string(lineno));
        try
        {
            rows[std::stoi(b)].emplace_back(std::stod(a), std::stod(c));
        }
        catch (std::exception const&)
        {
            throw ParameterError("phase-shift CSV: unparsable row " + std::to_string(lineno));
        }
    }
    if (rows.empty())
        throw ParameterError("phase-shift CSV: no data rows");
    int const l_max = rows.rbegin()->first;
    std::vector<double> k_grid;
    std::vector<std::vector<double>> delta(l_max + 1);
    for (int l = 0; l <= l_max; ++l)
    {
        auto it = rows.find(l);
        if (it == rows.end())
            throw ParameterError("phase-shift CSV: missing partial wave l=" + std::to_string(l));
        auto const& pts = it->second;
        if (l == 0)
        {
            for (auto const& [k, d] : pts)
                k_grid.push_back(k);
        }
        if (pts.size() != k_grid.size())
            throw ParameterError("phase-shift CSV: partial waves use different k grids");
        for (std::size_t i = 0; i < pts.size(); ++i)
        {
            if (pts[i].first != k_grid[i])
                throw ParameterError("phase-shift CSV: partial waves use different k grids");
            delta[l].push_back(pts[i].second);
        }
    }
    return PhaseShiftTable(std::move(k_grid), std::move(delta));
}

PhaseShiftTable read_table_csv(std::string const& path)
{
    std::ifstream in(path);
    if (!in)
        throw ParameterError("cannot open phase-shift table '" + path + "'");
    return read_table_csv(in);
}

void ScatteringChannel::validate() const
{
    if (potential.has_value() == table.has_value())
        throw ParameterError("channel '" + label
                             + "': exactly one of potential or table must be given");
    if (potential)
        potential->validate();
}

PhaseShiftTable resolve_channel(ScatteringChannel const& channel, double k_lo, double k_hi,
                                int l_max, SolverOptions const& options)
{
    channel.validate();
    if (channel.table)
        return *channel.table;
    if (!(k_lo > 0) || !(k_hi > k_lo) || l_max < 0)
        throw ParameterError("resolve_channel: need 0 < k_lo < k_hi and l_max >= 0");
    for (int points = 17; points <= 8193; points = 2 * points - 1)
    {
        std::vector<double> grid(points);
        for (int i = 0; i < points; ++i)
            grid[i] = k_lo + (k_hi - k_lo) * i / (points - 1);
        try
        {
            return build_phase_shift_table(*channel.potential, grid, l_max, options);
        }
        catch (ParameterError const&)
        {
        }
    }
    throw SolverError("channel '" + channel.label
                      + "': phase shifts vary too fast to tabulate over the requested range");
}
}  // namespace qsi::scatter
