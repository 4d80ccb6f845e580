#pragma once

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qsi/clock/ramsey.hpp"
#include "qsi/core/constants.hpp"
#include "qsi/core/fringe_data.hpp"
#include "qsi/core/vec3.hpp"
#include "qsi/fountain/fountain.hpp"
#include "qsi/scatterlib/table.hpp"

namespace qsi::collider
{
enum class CloudStateKind
{
    Pure,
    ClockSuperposition
};

struct CloudState
{
    CloudStateKind kind = CloudStateKind::Pure;
    int F = 4;
    int m = 4;

    static CloudState pure(int F, int m) { return {CloudStateKind::Pure, F, m}; }
    static CloudState clock_superposition() { return {CloudStateKind::ClockSuperposition, 3, 0}; }
};

enum class CloudRole
{
    Cloud1,
    Cloud2
};

struct CloudSpec
{
    double atom_number = 0;
    double temperature = 0;   //!< [K]
    double sigma_pos = 0;     //!< per-axis rms radius at launch [m]
    double peak_density = 0;  //!< at launch [1/m^3]
    CloudState state;
    CloudRole role = CloudRole::Cloud1;

    void validate() const;

    //! N / ((2 pi)^{3/2} sigma^3)
    double gaussian_peak_density() const;
    //! peak_density within `tolerance` of the Gaussian value
    bool density_consistent(double tolerance = 0.2) const;
    //! sqrt(kB T / m) per axis [m/s]
    double velocity_rms(double mass = constants::cs_mass) const;
};

CloudSpec default_cloud1();
CloudSpec default_cloud2();

enum class Lineshape
{
    TopHat,
    SincSquared
};

struct DetectionSpec
{
    double probe_vz = 0;             //!< probed CoM-frame vertical velocity [m/s]
    double probe_bandwidth = 0.014;  //!< FWHM [m/s]
    Lineshape lineshape = Lineshape::TopHat;
    double aperture_height = 0.01;   //!< vertical slit [m]
    double aperture_center = -2e-3;  //!< slit centre relative to the pair CoM [m]
    double beam_diameter = 0.02;     //!< [m]
    double cavity_aperture = 0.018;  //!< [m]
    double efficiency = 1e-3;        //!< detected counts per atom

    void validate() const;

    //! Raman transfer weight for a velocity offset from the probe (peak 1).
    double lineshape_weight(double dv) const;
};

enum class SignalClass
{
    Collisions,             //!< late clearing
    NoCollisions,           //!< early clearing
    BackgroundCollisions,   //!< late clearing, Cloud 2 preparation inhibited
    BackgroundNoCollisions  //!< early clearing, Cloud 2 preparation inhibited
};

std::string to_string(SignalClass cls);

struct SimulationSpec
{
    std::size_t samples = 100000;
    std::size_t max_samples = 1000000;
    std::size_t impurity_samples = 20000;
    double cloud1_impurity = 1e-3;  //!< Cloud 1 fraction left in |3,0>
    double cloud2_leak = 1e-3;      //!< Cloud 2 fraction surviving inhibited preparation
    bool thermal_average = false;   //!< per-atom k for amplitudes and cross sections
    int repetitions = 4;
    unsigned workers = 0;

    void validate() const;
};

struct RamseySpec
{
    clock::PulseModel pulse;
    double pulse_phase_offset = 0;           //!< [rad]
    int points = 161;
    double periods = 2.0;                    //!< grid spans +/- periods / T
    double scattered_frequency_shift_hz = 0; //!< control: shift acting on scattered atoms

    void validate() const;
};

//! Everything needed to synthesize one run of the experiment.
struct ExperimentSetup
{
    fountain::LaunchPlan plan;
    CloudSpec cloud1 = default_cloud1();
    CloudSpec cloud2 = default_cloud2();
    DetectionSpec detection;
    SimulationSpec sim;
    RamseySpec ramsey;
    scatter::PhaseShiftTable table3 = scatter::PhaseShiftTable::constant({0.6});
    scatter::PhaseShiftTable table4 = scatter::PhaseShiftTable::constant({0.741});
};

//! One weighted atom (or branch) at detection, in the pair CoM frame.
struct AtomRecord
{
    Vec3 position;              //!< relative to the pair CoM at detection [m]
    Vec3 velocity;              //!< relative to the pair CoM velocity [m/s]
    double cavity_radius = 0;   //!< horizontal radius at the last cavity passage [m]
    bool scattered = false;
    double theta = 0;           //!< polar angle about the relative velocity
    double phi = 0;
    double scatter_time = 0;
    double weight = 0;
    clock::ChannelFactors factors;
};

struct Cloud2Atom
{
    Vec3 launch_offset;       //!< position at launch [m]
    Vec3 launch_velocity;     //!< free-fall-frame velocity [m/s]
    AtomRecord unscattered;   //!< weight = full sample weight
    double p_early = 0;       //!< scattering probability before the early push
    double p_late = 0;        //!< between the early and late pushes
    double relative_speed = 0;
    AtomRecord early_branch;  //!< weight = w p_early
    AtomRecord late_branch;   //!< weight = w p_late
};

enum class ScatterMode
{
    ClockSuperposition,  //!< both channels, clock pulses on
    Channel3             //!< microwaves off: Cloud 2 stays in |3,0>
};

struct Ensembles
{
    fountain::LaunchPlan plan;
    fountain::CollisionGeometry geometry;
    CloudSpec cloud1;
    CloudSpec cloud2;
    std::vector<Cloud2Atom> cloud2_atoms;
    std::vector<AtomRecord> cloud1_impurity;
    double t_early_clear = 0;
    double t_late_clear = 0;
    double cloud2_leak = 0;
    bool scattered = false;
    ScatterMode mode = ScatterMode::ClockSuperposition;
    double max_probability = 0;
    std::vector<std::string> warnings;

    double cloud2_weight() const;
    //! Sum of branch weights for the given clearing (late = both segments).
    double scattered_weight(bool late) const;
};

//! Ballistic Gaussian clouds from launch to detection (no scattering yet).
Ensembles sample_clouds(CloudSpec const& cloud1, CloudSpec const& cloud2,
                        fountain::LaunchPlan const& plan, SimulationSpec const& sim,
                        std::uint64_t seed);

//! Single-scattering pass of every Cloud 2 sample through Cloud 1.
void scatter_events(Ensembles& ensembles, scatter::PhaseShiftTable const& table3,
                    scatter::PhaseShiftTable const& table4, ScatterMode mode,
                    SimulationSpec const& sim, std::uint64_t seed);

//! Weighted sums that fix the detected counts for any Ramsey detuning.
struct ClockSums
{
    double weight = 0;   //!< sum w (state-selection only)
    double s33 = 0;      //!< sum w |g3|^2
    double s44 = 0;      //!< sum w |g4|^2
    std::complex<double> s34;  //!< sum w g3 conj(g4)

    void add(double w, clock::ChannelFactors const& f);
    //! sum w |X g3 + Y g4|^2
    double probability_sum(std::complex<double> x, std::complex<double> y) const;
};

struct DetectionSums
{
    ClockSums cloud2;
    ClockSums cloud1;
};

//! 1 if the record passes the slit, cavity and beam cuts, else 0.
double aperture_transmission(AtomRecord const& atom, DetectionSpec const& det);

DetectionSums accumulate(Ensembles const& ensembles, DetectionSpec const& det, SignalClass cls);

//! Ramsey sequences for the two clouds (their interrogation times differ).
struct RamseyPair
{
    clock::RamseySequence cloud2;
    clock::RamseySequence cloud1;
};

RamseyPair make_ramsey_pair(Ensembles const& ensembles, RamseySpec const& spec,
                            double detuning_hz);

//! Expected counts; without a sequence the detector counts |3,0> atoms.
double expected_counts(DetectionSums const& sums, DetectionSpec const& det,
                       RamseyPair const* ramsey);

//! Expected detected counts of one signal class.
double detect(Ensembles const& ensembles, DetectionSpec const& det, SignalClass cls,
              std::optional<RamseyPair> const& ramsey = std::nullopt);

//! Fraction of Cloud 2 scattered into the probe velocity window (no position cuts).
double scattered_fraction_in_window(Ensembles const& ensembles, DetectionSpec const& det);

struct VelocityScan
{
    std::vector<double> v_grid;
    std::vector<double> collisions;
    std::vector<double> no_collisions;
    std::vector<double> background_collisions;
    std::vector<double> background_no_collisions;
    std::vector<double> difference;
    std::vector<std::string> warnings;
};

std::vector<double> default_velocity_grid(double half_width = 0.08, int points = 161);

//! Four probe sweeps with the microwaves off.
VelocityScan velocity_scan(ExperimentSetup const& setup, std::vector<double> const& v_grid,
                           std::uint64_t seed, bool noise);

void write_velocity_scan_csv(std::ostream& os, VelocityScan const& scan);

//! Noise-free counts per detuning for every signal class.
struct ExpectedFringes
{
    std::vector<double> detuning_hz;
    std::vector<double> late;
    std::vector<double> early;
    std::vector<double> bg_late;
    std::vector<double> bg_early;
    std::vector<double> unscattered;  //!< early clearing probed at v_z2
    double T = 0;
    int repetitions = 4;
    std::vector<std::string> warnings;
};

ExpectedFringes expected_fringes(ExperimentSetup const& setup, std::uint64_t seed);

struct FringeSet
{
    FringeData scattered;    //!< (late - bg_late) - (early - bg_early), averaged
    FringeData unscattered;
    FringeData bg_early;
    FringeData bg_late;
    std::vector<std::string> warnings;
};

//! Average `repetitions` noisy (or noise-free) four-difference cycles.
FringeSet realize_fringes(ExpectedFringes const& expected, std::uint64_t seed, bool noise);

FringeSet synthesize_fringes(ExperimentSetup const& setup, std::uint64_t seed, bool noise);

void write_fringe_set_csv(std::ostream& os, FringeSet const& set);
}  // namespace qsi::collider
