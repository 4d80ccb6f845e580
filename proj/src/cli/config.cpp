#include "qsi/cli/config.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "qsi/core/constants.hpp"
#include "qsi/core/errors.hpp"
#include "qsi/fountain/fountain.hpp"

namespace qsi::cli
{
namespace
{
namespace c = qsi::constants;

constexpr Provenance paper = Provenance::Paper;
constexpr Provenance assumption = Provenance::Assumption;

std::vector<DefaultEntry> build_registry()
{
    collider::ExperimentSetup const s;
    fountain::LaunchPlan const& p = s.plan;
    collider::CloudSpec const& a = s.cloud1;
    collider::CloudSpec const& b = s.cloud2;
    collider::DetectionSpec const& d = s.detection;
    collider::SimulationSpec const& sim = s.sim;
    collider::RamseySpec const& r = s.ramsey;

    std::vector<DefaultEntry> e{
        {"constants.g_m_per_s2", p.g, paper, "gravitational acceleration (v_r = g dt)"},
        {"constants.mass_kg", p.mass, paper, "caesium atomic mass"},

        {"launch.v_launch1_m_per_s", p.v_launch1, assumption, "Cloud 1 launch velocity (T = 0.233 s)"},
        {"launch.v_launch2_m_per_s", p.v_launch2, assumption, "Cloud 2 launch velocity"},
        {"launch.dt_launch_s", p.dt_launch, paper, "launch spacing giving v_r = 9.92 cm/s"},
        {"launch.z_cavity_m", p.z_cavity, assumption, "clock cavity height above launch"},
        {"launch.z_detect_m", p.z_detect, assumption, "detection height (0.13 s after the collision)"},
        {"launch.pulse_duration_s", p.pulse_duration, assumption, "cavity transit time per Ramsey pulse"},
        {"launch.v_min_m_per_s", p.v_min, assumption, "launch sanity band, lower edge"},
        {"launch.v_max_m_per_s", p.v_max, assumption, "launch sanity band, upper edge"},

        {"cloud1.atom_number", a.atom_number, paper, "atoms in Cloud 1"},
        {"cloud1.temperature_K", a.temperature, paper, "Cloud 1 temperature"},
        {"cloud1.sigma_pos_m", a.sigma_pos, assumption, "Cloud 1 rms radius from N and peak density"},
        {"cloud1.peak_density_per_m3", a.peak_density, paper, "Cloud 1 peak density at launch"},
        {"cloud1.state", "4,4", paper, "Cloud 1 state F,m"},
        {"cloud2.atom_number", b.atom_number, paper, "atoms in Cloud 2"},
        {"cloud2.temperature_K", b.temperature, paper, "Cloud 2 temperature"},
        {"cloud2.sigma_pos_m", b.sigma_pos, assumption, "Cloud 2 rms radius from N and peak density"},
        {"cloud2.peak_density_per_m3", b.peak_density, paper, "Cloud 2 peak density at launch"},
        {"cloud2.state", "clock", paper, "Cloud 2 state: clock superposition or F,m"},

        {"channels.state3", Json{{"kind", "table"}, {"delta_rad", {0.6}}}, assumption,
         "|3,0> + |4,4> channel: s-wave phase injected so that delta3 - delta4 = -0.141"},
        {"channels.state4", Json{{"kind", "table"}, {"delta_rad", {0.741}}}, assumption,
         "|4,0> + |4,4> channel"},
        {"channels.l_max", 2, assumption, "highest partial wave for potential channels"},
        {"channels.k_span", Json{0.5, 2.0}, assumption, "table range as multiples of the collision k"},

        {"ramsey.pulse", "ideal", assumption, "ideal | finite_pi_over_two | finite_rabi"},
        {"ramsey.rabi_frequency_rad_per_s", 0.5 * c::pi / p.pulse_duration, assumption,
         "Rabi frequency for finite_rabi pulses"},
        {"ramsey.pulse_phase_offset_rad", r.pulse_phase_offset, assumption, "phase of the second pulse"},
        {"ramsey.points", r.points, assumption, "detuning grid points"},
        {"ramsey.periods", r.periods, paper, "grid half-width in fringe periods (entire pattern)"},
        {"ramsey.scattered_frequency_shift_hz", r.scattered_frequency_shift_hz, assumption,
         "control: frequency shift acting on scattered atoms"},

        {"detection.probe_vz_m_per_s", d.probe_vz, paper, "probe velocity (90 degree scattering)"},
        {"detection.probe_bandwidth_m_per_s", d.probe_bandwidth, paper, "Raman velocity width"},
        {"detection.lineshape", "top_hat", assumption, "top_hat | sinc_squared"},
        {"detection.aperture_height_m", d.aperture_height, paper, "vertical aperture height"},
        {"detection.aperture_center_m", d.aperture_center, assumption, "aperture centre below the pair centre of mass"},
        {"detection.beam_diameter_m", d.beam_diameter, paper, "detection beam diameter"},
        {"detection.cavity_aperture_m", d.cavity_aperture, paper, "cavity aperture diameter"},
        {"detection.efficiency", d.efficiency, assumption, "detected counts per atom"},

        {"veldist.half_width_m_per_s", 0.08, assumption, "velocity scan half-width"},
        {"veldist.points", 161, assumption, "velocity scan points"},

        {"simulation.samples", sim.samples, assumption, "Cloud 2 Monte Carlo samples"},
        {"simulation.max_samples", sim.max_samples, assumption, "sample budget"},
        {"simulation.impurity_samples", sim.impurity_samples, assumption, "Cloud 1 impurity samples"},
        {"simulation.cloud1_impurity", sim.cloud1_impurity, assumption, "Cloud 1 fraction left in |3,0>"},
        {"simulation.cloud2_leak", sim.cloud2_leak, assumption, "Cloud 2 fraction surviving inhibited preparation"},
        {"simulation.thermal_average", sim.thermal_average, assumption, "per-atom collision energy"},
        {"simulation.repetitions", sim.repetitions, paper, "four differences of four measurements"},

        {"analysis.window", "full", assumption, "full | central"},

        {"campaign.T_values_s", Json{0.115, 0.233, 0.450}, paper, "interrogation times"},
        {"campaign.densities_per_m3", Json{1.5e15, 3e15, 6e15}, paper, "Cloud 1 densities"},

        {"noise", true, assumption, "Poisson shot noise"},
        {"seed", 1, assumption, "64-bit random seed"},
    };
    return e;
}

[[noreturn]] void fail(std::string const& path, std::string const& what)
{
    throw ConfigError("config field '" + path + "': " + what);
}

bool ends_with(std::string const& s, std::string const& suffix)
{
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

Json scale_numbers(Json const& v, double f, std::string const& path)
{
    if (v.is_number())
        return v.get<double>() * f;
    if (v.is_array())
    {
        Json out = Json::array();
        for (auto const& x : v)
        {
            if (!x.is_number())
                fail(path, "expected numbers");
            out.push_back(x.get<double>() * f);
        }
        return out;
    }
    fail(path, "expected a number");
}

// _cm_per_s -> _m_per_s, recursively
Json normalize_units(Json const& in, std::string const& prefix)
{
    if (!in.is_object())
        return in;
    Json out = Json::object();
    for (auto const& [key, value] : in.items())
    {
        std::string const path = prefix.empty() ? key : prefix + "." + key;
        std::string name = key;
        Json v = normalize_units(value, path);
        if (ends_with(key, "_cm_per_s"))
        {
            name = key.substr(0, key.size() - 9) + "_m_per_s";
            v = scale_numbers(v, 0.01, path);
        }
        if (out.contains(name))
            fail(path, "given in both m/s and cm/s");
        out[name] = v;
    }
    return out;
}

bool same_kind(Json const& def, Json const& v)
{
    if (def.is_number())
        return v.is_number();
    if (def.is_boolean())
        return v.is_boolean();
    if (def.is_string())
        return v.is_string();
    if (def.is_array())
        return v.is_array();
    if (def.is_object())
        return v.is_object();
    return false;
}

std::string kind_name(Json const& def)
{
    if (def.is_number())
        return "a number";
    if (def.is_boolean())
        return "true or false";
    if (def.is_string())
        return "a string";
    if (def.is_array())
        return "an array";
    return "an object";
}

void overlay(Json& doc, Json const& user, std::string const& prefix,
             std::set<std::string> const& leaves)
{
    for (auto const& [key, value] : user.items())
    {
        std::string const path = prefix.empty() ? key : prefix + "." + key;
        if (!doc.contains(key))
            fail(path, "unknown key");
        Json& target = doc[key];
        if (leaves.count(path))
        {
            if (!same_kind(target, value))
                fail(path, "expected " + kind_name(target));
            target = value;
        }
        else
        {
            if (!value.is_object())
                fail(path, "expected an object");
            overlay(target, value, path, leaves);
        }
    }
}

Json const& at(Json const& doc, std::string const& path)
{
    Json const* node = &doc;
    std::stringstream ss(path);
    std::string part;
    while (std::getline(ss, part, '.'))
        node = &node->at(part);
    return *node;
}

double number(Json const& doc, std::string const& path)
{
    double const v = at(doc, path).get<double>();
    if (!std::isfinite(v))
        fail(path, "must be finite");
    return v;
}

double positive(Json const& doc, std::string const& path)
{
    double const v = number(doc, path);
    if (!(v > 0))
        fail(path, "must be positive");
    return v;
}

long long integer(Json const& doc, std::string const& path, long long lo)
{
    Json const& j = at(doc, path);
    double const v = j.get<double>();
    if (v != std::floor(v) || v < static_cast<double>(lo) || v > 9.0e15)
        fail(path, "must be an integer >= " + std::to_string(lo));
    return static_cast<long long>(v);
}

std::vector<double> numbers(Json const& doc, std::string const& path)
{
    std::vector<double> out;
    for (auto const& x : at(doc, path))
    {
        if (!x.is_number())
            fail(path, "expected numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

collider::CloudState parse_state(std::string const& s, std::string const& path)
{
    if (s == "clock")
        return collider::CloudState::clock_superposition();
    int F = 0, m = 0;
    char tail = 0;
    if (std::sscanf(s.c_str(), "%d,%d%c", &F, &m, &tail) != 2 || (F != 3 && F != 4) || m < -F || m > F)
        fail(path, "expected \"clock\" or \"F,m\" with F in {3, 4}, got \"" + s + "\"");
    return collider::CloudState::pure(F, m);
}

ChannelConfig parse_channel(Json const& j, std::string const& path)
{
    ChannelConfig ch;
    if (!j.contains("kind") || !j["kind"].is_string())
        fail(path + ".kind", "required string");
    ch.kind = j["kind"].get<std::string>();
    std::set<std::string> allowed{"kind"};
    auto num = [&](char const* key) {
        allowed.insert(key);
        std::string const p = path + "." + key;
        if (!j.contains(key) || !j[key].is_number())
            fail(p, "required number");
        return j[key].get<double>();
    };
    if (ch.kind == "table")
    {
        allowed.insert("delta_rad");
        if (!j.contains("delta_rad") || !j["delta_rad"].is_array() || j["delta_rad"].empty())
            fail(path + ".delta_rad", "required non-empty array");
        for (auto const& x : j["delta_rad"])
        {
            if (!x.is_number())
                fail(path + ".delta_rad", "expected numbers");
            ch.delta_rad.push_back(x.get<double>());
        }
    }
    else if (ch.kind == "table_csv")
    {
        allowed.insert("path");
        if (!j.contains("path") || !j["path"].is_string())
            fail(path + ".path", "required string");
        ch.path = j["path"].get<std::string>();
    }
    else if (ch.kind == "square_well")
    {
        ch.depth_J = num("depth_J");
        ch.radius_m = num("radius_m");
    }
    else if (ch.kind == "lennard_jones")
    {
        ch.c12_J_m12 = num("c12_J_m12");
        ch.c6_J_m6 = num("c6_J_m6");
    }
    else
    {
        fail(path + ".kind", "expected table, table_csv, square_well or lennard_jones");
    }
    for (auto const& [key, value] : j.items())
        if (!allowed.count(key))
            fail(path + "." + key, "unknown key for kind " + ch.kind);
    return ch;
}

template<class F>
void checked(std::string const& section, F&& f)
{
    try
    {
        f();
    }
    catch (ConfigError const&)
    {
        throw;
    }
    catch (Error const& e)
    {
        throw ConfigError("config section '" + section + "': " + e.what());
    }
}

std::string line_column(std::string const& text, std::size_t byte)
{
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i)
    {
        if (text[i] == '\n')
        {
            ++line;
            col = 1;
        }
        else
        {
            ++col;
        }
    }
    return "line " + std::to_string(line) + " column " + std::to_string(col);
}
}  // namespace

//---------------------------------------------------------------------------//
std::vector<DefaultEntry> const& default_registry()
{
    static std::vector<DefaultEntry> const registry = build_registry();
    return registry;
}

Json default_config_json()
{
    Json doc = Json::object();
    for (auto const& e : default_registry())
    {
        Json* node = &doc;
        std::stringstream ss(e.path);
        std::string part;
        std::vector<std::string> parts;
        while (std::getline(ss, part, '.'))
            parts.push_back(part);
        for (std::size_t i = 0; i + 1 < parts.size(); ++i)
            node = &(*node)[parts[i]];
        (*node)[parts.back()] = e.value;
    }
    return doc;
}

std::string format_defaults()
{
    std::ostringstream os;
    for (auto const& e : default_registry())
    {
        os << e.path << " = " << e.value.dump() << " ["
           << (e.provenance == Provenance::Paper ? "paper" : "assumption") << "] "
           << e.description << '\n';
    }
    return os.str();
}

ExperimentConfig parse_config(std::string const& text, std::string const& base_dir)
{
    Json user;
    try
    {
        user = Json::parse(text);
    }
    catch (nlohmann::json::parse_error const& e)
    {
        throw ConfigError("config syntax error at " + line_column(text, e.byte > 0 ? e.byte - 1 : 0)
                          + ": " + e.what());
    }
    if (!user.is_object())
        throw ConfigError("config: top level must be a JSON object");

    std::set<std::string> leaves;
    for (auto const& e : default_registry())
        leaves.insert(e.path);
    Json doc = default_config_json();
    overlay(doc, normalize_units(user, ""), "", leaves);

    ExperimentConfig cfg;
    cfg.base_dir = base_dir;
    auto& s = cfg.setup;
    auto& p = s.plan;
    p.g = positive(doc, "constants.g_m_per_s2");
    p.mass = positive(doc, "constants.mass_kg");
    p.v_launch1 = number(doc, "launch.v_launch1_m_per_s");
    p.v_launch2 = number(doc, "launch.v_launch2_m_per_s");
    p.dt_launch = number(doc, "launch.dt_launch_s");
    p.z_cavity = number(doc, "launch.z_cavity_m");
    p.z_detect = number(doc, "launch.z_detect_m");
    p.pulse_duration = number(doc, "launch.pulse_duration_s");
    p.v_min = number(doc, "launch.v_min_m_per_s");
    p.v_max = number(doc, "launch.v_max_m_per_s");
    checked("launch", [&] { p.validate(); });

    for (int i = 0; i < 2; ++i)
    {
        std::string const name = i == 0 ? "cloud1" : "cloud2";
        auto& cl = i == 0 ? s.cloud1 : s.cloud2;
        cl.atom_number = number(doc, name + ".atom_number");
        cl.temperature = number(doc, name + ".temperature_K");
        cl.sigma_pos = number(doc, name + ".sigma_pos_m");
        cl.peak_density = number(doc, name + ".peak_density_per_m3");
        cl.state = parse_state(at(doc, name + ".state").get<std::string>(), name + ".state");
        cl.role = i == 0 ? collider::CloudRole::Cloud1 : collider::CloudRole::Cloud2;
        checked(name, [&] { cl.validate(); });
    }

    cfg.channel3 = parse_channel(at(doc, "channels.state3"), "channels.state3");
    cfg.channel4 = parse_channel(at(doc, "channels.state4"), "channels.state4");
    cfg.l_max = static_cast<int>(integer(doc, "channels.l_max", 0));
    auto const span = numbers(doc, "channels.k_span");
    if (span.size() != 2 || !(span[0] > 0) || !(span[1] > span[0]))
        fail("channels.k_span", "expected [lo, hi] with 0 < lo < hi");
    cfg.k_span_lo = span[0];
    cfg.k_span_hi = span[1];

    auto& r = s.ramsey;
    std::string const pulse = at(doc, "ramsey.pulse").get<std::string>();
    if (pulse == "ideal")
        r.pulse = clock::PulseModel::ideal();
    else if (pulse == "finite_pi_over_two")
        checked("ramsey", [&] { r.pulse = clock::PulseModel::finite_pi_over_two(p.pulse_duration); });
    else if (pulse == "finite_rabi")
        r.pulse = clock::PulseModel::finite_rabi(positive(doc, "ramsey.rabi_frequency_rad_per_s"),
                                                 p.pulse_duration);
    else
        fail("ramsey.pulse", "expected ideal, finite_pi_over_two or finite_rabi");
    positive(doc, "ramsey.rabi_frequency_rad_per_s");
    r.pulse_phase_offset = number(doc, "ramsey.pulse_phase_offset_rad");
    r.points = static_cast<int>(integer(doc, "ramsey.points", 2));
    r.periods = positive(doc, "ramsey.periods");
    r.scattered_frequency_shift_hz = number(doc, "ramsey.scattered_frequency_shift_hz");
    checked("ramsey", [&] { r.validate(); });

    auto& d = s.detection;
    d.probe_vz = number(doc, "detection.probe_vz_m_per_s");
    d.probe_bandwidth = number(doc, "detection.probe_bandwidth_m_per_s");
    std::string const ls = at(doc, "detection.lineshape").get<std::string>();
    if (ls == "top_hat")
        d.lineshape = collider::Lineshape::TopHat;
    else if (ls == "sinc_squared")
        d.lineshape = collider::Lineshape::SincSquared;
    else
        fail("detection.lineshape", "expected top_hat or sinc_squared");
    d.aperture_height = number(doc, "detection.aperture_height_m");
    d.aperture_center = number(doc, "detection.aperture_center_m");
    d.beam_diameter = number(doc, "detection.beam_diameter_m");
    d.cavity_aperture = number(doc, "detection.cavity_aperture_m");
    d.efficiency = number(doc, "detection.efficiency");
    checked("detection", [&] { d.validate(); });

    cfg.veldist_half_width = positive(doc, "veldist.half_width_m_per_s");
    cfg.veldist_points = static_cast<int>(integer(doc, "veldist.points", 2));

    auto& sim = s.sim;
    sim.samples = static_cast<std::size_t>(integer(doc, "simulation.samples", 1));
    sim.max_samples = static_cast<std::size_t>(integer(doc, "simulation.max_samples", 1));
    sim.impurity_samples = static_cast<std::size_t>(integer(doc, "simulation.impurity_samples", 1));
    sim.cloud1_impurity = number(doc, "simulation.cloud1_impurity");
    sim.cloud2_leak = number(doc, "simulation.cloud2_leak");
    sim.thermal_average = at(doc, "simulation.thermal_average").get<bool>();
    sim.repetitions = static_cast<int>(integer(doc, "simulation.repetitions", 1));
    checked("simulation", [&] { sim.validate(); });

    std::string const window = at(doc, "analysis.window").get<std::string>();
    if (window == "full")
        cfg.window = analysis::FitWindow::Full;
    else if (window == "central")
        cfg.window = analysis::FitWindow::CentralFringe;
    else
        fail("analysis.window", "expected full or central");

    cfg.campaign_T = numbers(doc, "campaign.T_values_s");
    cfg.campaign_densities = numbers(doc, "campaign.densities_per_m3");
    cfg.noise = doc["noise"].get<bool>();
    if (doc["seed"].is_number_unsigned())
        cfg.seed = doc["seed"].get<std::uint64_t>();
    else
        cfg.seed = static_cast<std::uint64_t>(integer(doc, "seed", 0));

    checked("launch", [&] { fountain::collision_geometry(p); });
    cfg.resolved = doc;
    return cfg;
}

ExperimentConfig load_config(std::string const& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    auto const dir = std::filesystem::path(path).parent_path();
    return parse_config(ss.str(), dir.empty() ? "." : dir.string());
}

ExperimentConfig default_config()
{
    return parse_config("{}");
}

scatter::ScatteringChannel make_channel(ChannelConfig const& cfg, std::string const& label,
                                        double mass, std::string const& base_dir)
{
    scatter::ScatteringChannel ch;
    ch.label = label;
    double const mu = scatter::equal_mass_reduced(mass);
    if (cfg.kind == "table")
    {
        ch.table = scatter::PhaseShiftTable::constant(cfg.delta_rad);
    }
    else if (cfg.kind == "table_csv")
    {
        std::filesystem::path path(cfg.path);
        if (path.is_relative())
            path = std::filesystem::path(base_dir) / path;
        std::ifstream in(path);
        if (!in)
            throw ConfigError("channel " + label + ": cannot open table " + path.string());
        ch.table = scatter::read_table_csv(in);
    }
    else if (cfg.kind == "square_well")
    {
        ch.potential = scatter::Potential::square_well(cfg.depth_J, cfg.radius_m, mu);
    }
    else
    {
        ch.potential = scatter::Potential::lennard_jones(cfg.c12_J_m12, cfg.c6_J_m6, mu);
    }
    return ch;
}

void resolve_channels(ExperimentConfig& cfg)
{
    double const k = fountain::collision_geometry(cfg.setup.plan).wavenumber;
    double const lo = cfg.k_span_lo * k, hi = cfg.k_span_hi * k;
    std::string const dir = cfg.base_dir;
    double const mass = cfg.setup.plan.mass;
    scatter::ScatteringChannel ch3, ch4;
    checked("channels.state3", [&] { ch3 = make_channel(cfg.channel3, "state3", mass, dir); });
    checked("channels.state4", [&] { ch4 = make_channel(cfg.channel4, "state4", mass, dir); });
    cfg.setup.table3 = scatter::resolve_channel(ch3, lo, hi, cfg.l_max);
    cfg.setup.table4 = scatter::resolve_channel(ch4, lo, hi, cfg.l_max);
    for (auto const* t : {&cfg.setup.table3, &cfg.setup.table4})
        if (!t->covers(lo) || !t->covers(hi))
            throw ConfigError("channels: table does not cover the collision wavenumber range");
}

std::uint64_t fnv1a64(std::string const& bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : bytes)
    {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string config_hash(ExperimentConfig const& cfg)
{
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(cfg.resolved.dump())));
    return buf;
}
}  // namespace qsi::cli
