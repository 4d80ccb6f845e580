#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phase_shift.hpp"
#include "potential.hpp"

namespace qsi::scatter
{
//---------------------------------------------------------------------------//
/*!
 * Phase shifts delta_l(k) on a wavenumber grid, immutable after construction.
 *
 * Adjacent grid values of each partial wave must differ by less than
 * max_step (0.01 rad), which bounds the error of linear interpolation.
 */
class PhaseShiftTable
{
  public:
    static constexpr double max_step = 0.01;

    //! delta[l][i] at k_grid[i]; throws ParameterError on invalid input.
    PhaseShiftTable(std::vector<double> k_grid, std::vector<std::vector<double>> delta);

    //! k-independent phase shifts over [k_lo, k_hi] (direct injection).
    static PhaseShiftTable constant(std::vector<double> const& delta_per_l,
                                    double k_lo = 1e3,
                                    double k_hi = 1e12);

    int l_max() const { return static_cast<int>(delta_.size()) - 1; }
    std::span<double const> k_grid() const { return k_grid_; }
    std::span<double const> row(int l) const { return delta_.at(l); }

    bool covers(double k) const;

    //! Linearly interpolated delta_l(k); RangeError outside the grid.
    double delta(int l, double k) const;

    //! All partial waves at k.
    std::vector<double> deltas_at(double k) const;

  private:
    std::vector<double> k_grid_;
    std::vector<std::vector<double>> delta_;
};

//! Solve every (l, k) and unwrap each row along k by multiples of pi.
PhaseShiftTable build_phase_shift_table(Potential const& potential,
                                        std::vector<double> const& k_grid,
                                        int l_max,
                                        SolverOptions const& options = {});

//! CSV with header `k_per_m,l,delta_rad`, rows sorted by (l, k).
void write_table_csv(std::ostream& os, PhaseShiftTable const& table);
PhaseShiftTable read_table_csv(std::istream& is);
PhaseShiftTable read_table_csv(std::string const& path);

//! One labelled collision channel: a potential or an injected table.
struct ScatteringChannel
{
    std::string label;
    std::optional<Potential> potential;
    std::optional<PhaseShiftTable> table;

    //! Exactly one of potential / table must be set.
    void validate() const;
};

//! Table for the channel: the injected one, or one built from the potential on
//! a uniform grid over [k_lo, k_hi] refined until adjacent values are close.
PhaseShiftTable resolve_channel(ScatteringChannel const& channel, double k_lo, double k_hi,
                                int l_max, SolverOptions const& options = {});
}  // namespace qsi::scatter
