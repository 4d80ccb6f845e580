#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "qsi/analysis/analysis.hpp"
#include "qsi/collider/collider.hpp"
#include "qsi/scatterlib/table.hpp"

namespace qsi::cli
{
using Json = nlohmann::ordered_json;

enum class Provenance
{
    Paper,
    Assumption
};

//! One documented configuration default.
struct DefaultEntry
{
    std::string path;  //!< dotted key, e.g. "cloud1.temperature_K"
    Json value;
    Provenance provenance = Provenance::Assumption;
    std::string description;
};

//! Every configurable leaf with its default and provenance tag.
std::vector<DefaultEntry> const& default_registry();

//! Nested JSON document holding every default.
Json default_config_json();

//! "path = value [paper|assumption] description" per registry entry.
std::string format_defaults();

//! Channel description for one clock state.
struct ChannelConfig
{
    std::string kind = "table";  //!< table | table_csv | square_well | lennard_jones
    std::vector<double> delta_rad;
    std::string path;
    double depth_J = 0;
    double radius_m = 0;
    double c12_J_m12 = 0;
    double c6_J_m6 = 0;
};

struct ExperimentConfig
{
    collider::ExperimentSetup setup;  //!< tables set by resolve_channels
    ChannelConfig channel3;
    ChannelConfig channel4;
    int l_max = 2;
    double k_span_lo = 0.5;  //!< table range relative to the collision k
    double k_span_hi = 2.0;
    double veldist_half_width = 0.08;
    int veldist_points = 161;
    std::vector<double> campaign_T;
    std::vector<double> campaign_densities;
    analysis::FitWindow window = analysis::FitWindow::Full;
    bool noise = true;
    std::uint64_t seed = 1;
    std::string base_dir = ".";  //!< relative table paths resolve against this
    Json resolved;  //!< full document after defaults and unit conversion
};

/*!
 * Parse a JSON config overlaid on the defaults.
 *
 * Unknown keys, wrong types and invalid values raise ConfigError naming the
 * field; syntax errors report line and column. Keys ending in _m_per_s may be
 * given as _cm_per_s instead.
 */
ExperimentConfig parse_config(std::string const& text, std::string const& base_dir = ".");
ExperimentConfig load_config(std::string const& path);
ExperimentConfig default_config();

//! Resolve both channel tables around the collision wavenumber.
void resolve_channels(ExperimentConfig& cfg);

//! Build the scatterlib potential or table for a channel.
scatter::ScatteringChannel make_channel(ChannelConfig const& cfg, std::string const& label,
                                        double mass, std::string const& base_dir);

//! 64-bit FNV-1a of a byte string.
std::uint64_t fnv1a64(std::string const& bytes);

//! FNV-1a of the resolved config (compact dump), as 16 hex digits.
std::string config_hash(ExperimentConfig const& cfg);
}  // namespace qsi::cli
