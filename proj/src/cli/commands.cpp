#include "qsi/cli/commands.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "qsi/analysis/analysis.hpp"
#include "qsi/cli/config.hpp"
#include "qsi/core/errors.hpp"
#include "qsi/fountain/fountain.hpp"
#include "qsi/scatterlib/table.hpp"

namespace qsi::cli
{
namespace
{
struct Globals
{
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_path;
    bool no_noise = false;
    bool print_defaults = false;
    bool no_timestamp = false;
    unsigned threads = 0;
};

struct Context
{
    Globals const& g;
    ExperimentConfig cfg;
    std::string command;
    std::ostream& out;
};

std::string utc_now()
{
    auto const now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string fmt(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string csv_header(Context const& ctx, std::string const& extra = {})
{
    std::ostringstream os;
    os << "# qsi " << ctx.command << " config_hash=" << config_hash(ctx.cfg)
       << " seed=" << ctx.cfg.seed << " noise=" << (ctx.cfg.noise ? 1 : 0);
    if (!extra.empty())
        os << ' ' << extra;
    os << '\n';
    if (!ctx.g.no_timestamp)
        os << "# generated " << utc_now() << '\n';
    return os.str();
}

Json meta(Context const& ctx)
{
    Json m;
    m["command"] = ctx.command;
    m["config_hash"] = config_hash(ctx.cfg);
    m["seed"] = ctx.cfg.seed;
    m["noise"] = ctx.cfg.noise;
    if (!ctx.g.no_timestamp)
        m["generated"] = utc_now();
    return m;
}

void emit(Context const& ctx, std::string const& path, std::string const& text)
{
    if (path.empty())
    {
        ctx.out << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw Error("cannot open output file " + path);
    f << text;
    if (!f)
        throw Error("failed writing " + path);
}

void emit_json(Context const& ctx, std::string const& path, Json body)
{
    Json doc;
    doc["_meta"] = meta(ctx);
    for (auto& [k, v] : body.items())
        doc[k] = v;
    emit(ctx, path, doc.dump(2) + "\n");
}

//---------------------------------------------------------------------------//
struct PhaseshiftArgs
{
    std::string channel = "state3";
    std::optional<double> k_min, k_max;
    int points = 41;
    std::optional<int> l_max;
};

void cmd_phaseshifts(Context& ctx, PhaseshiftArgs const& a)
{
    auto& cfg = ctx.cfg;
    if (a.channel != "state3" && a.channel != "state4")
        throw ConfigError("phaseshifts: --channel must be state3 or state4");
    double const k = fountain::collision_geometry(cfg.setup.plan).wavenumber;
    double const lo = a.k_min.value_or(cfg.k_span_lo * k);
    double const hi = a.k_max.value_or(cfg.k_span_hi * k);
    int const l_max = a.l_max.value_or(cfg.l_max);
    if (!(lo > 0) || !(hi > lo))
        throw ConfigError("phaseshifts: need 0 < k_min < k_max");
    if (a.points < 2)
        throw ConfigError("phaseshifts: need at least 2 points");
    if (l_max < 0)
        throw ConfigError("phaseshifts: l_max must be >= 0");
    std::vector<double> grid(a.points);
    for (int i = 0; i < a.points; ++i)
        grid[i] = lo + (hi - lo) * i / (a.points - 1);
    grid.back() = hi;

    auto const& chc = a.channel == "state3" ? cfg.channel3 : cfg.channel4;
    auto const ch = make_channel(chc, a.channel, cfg.setup.plan.mass, cfg.base_dir);
    std::optional<scatter::PhaseShiftTable> table;
    if (ch.potential)
    {
        table = scatter::build_phase_shift_table(*ch.potential, grid, l_max);
    }
    else
    {
        std::vector<std::vector<double>> rows(l_max + 1, std::vector<double>(grid.size(), 0.0));
        for (int l = 0; l <= std::min(l_max, ch.table->l_max()); ++l)
            for (std::size_t i = 0; i < grid.size(); ++i)
                rows[l][i] = ch.table->delta(l, grid[i]);
        table.emplace(grid, rows);
    }
    std::ostringstream os;
    os << csv_header(ctx, "channel=" + a.channel);
    scatter::write_table_csv(os, *table);
    emit(ctx, ctx.g.out_path, os.str());
}

void cmd_veldist(Context& ctx)
{
    resolve_channels(ctx.cfg);
    auto const grid = collider::default_velocity_grid(ctx.cfg.veldist_half_width,
                                                      ctx.cfg.veldist_points);
    auto const scan = collider::velocity_scan(ctx.cfg.setup, grid, ctx.cfg.seed, ctx.cfg.noise);
    std::ostringstream os;
    os << csv_header(ctx);
    for (auto const& w : scan.warnings)
        os << "# warning: " << w << '\n';
    collider::write_velocity_scan_csv(os, scan);
    emit(ctx, ctx.g.out_path, os.str());
}

void cmd_fringes(Context& ctx, std::optional<double> probe_vz)
{
    resolve_channels(ctx.cfg);
    if (probe_vz)
        ctx.cfg.setup.detection.probe_vz = *probe_vz;
    ctx.cfg.resolved["detection"]["probe_vz_m_per_s"] = ctx.cfg.setup.detection.probe_vz;
    auto const set = collider::synthesize_fringes(ctx.cfg.setup, ctx.cfg.seed, ctx.cfg.noise);
    std::ostringstream os;
    os << csv_header(ctx, "T_s=" + fmt(set.scattered.interrogation_time));
    for (auto const& w : set.warnings)
        os << "# warning: " << w << '\n';
    collider::write_fringe_set_csv(os, set);
    emit(ctx, ctx.g.out_path, os.str());
}

struct CampaignArgs
{
    std::string vary;
    std::vector<double> values;
    std::string points_out;
};

void cmd_campaign(Context& ctx, CampaignArgs const& a)
{
    resolve_channels(ctx.cfg);
    analysis::CampaignOptions opt;
    opt.noise = ctx.cfg.noise;
    opt.fit.window = ctx.cfg.window;
    analysis::CampaignResult res;
    if (a.vary == "T")
    {
        auto const values = a.values.empty() ? ctx.cfg.campaign_T : a.values;
        ctx.cfg.resolved["campaign"]["T_values_s"] = values;
        res = analysis::campaign_phase_vs_T(ctx.cfg.setup, values, ctx.cfg.seed, opt);
    }
    else if (a.vary == "density")
    {
        auto const values = a.values.empty() ? ctx.cfg.campaign_densities : a.values;
        ctx.cfg.resolved["campaign"]["densities_per_m3"] = values;
        res = analysis::campaign_phase_vs_density(ctx.cfg.setup, values, ctx.cfg.seed, opt);
    }
    else
    {
        throw ConfigError("campaign: --vary must be T or density");
    }
    emit_json(ctx, ctx.g.out_path, analysis::to_json(res));

    std::string points_path = a.points_out;
    if (points_path.empty() && !ctx.g.out_path.empty())
    {
        auto const& o = ctx.g.out_path;
        auto const dot = o.rfind('.');
        auto const slash = o.rfind('/');
        bool const has_ext = dot != std::string::npos && (slash == std::string::npos || dot > slash);
        points_path = (has_ext ? o.substr(0, dot) : o) + ".points.csv";
    }
    if (!points_path.empty())
    {
        std::ostringstream os;
        os << csv_header(ctx, "vary=" + a.vary);
        analysis::write_campaign_points_csv(os, res);
        emit(ctx, points_path, os.str());
    }
}

struct FitArgs
{
    std::string in;
    std::optional<double> T;
    std::string label = "scattered";
    std::string window;
};

void cmd_fit(Context& ctx, FitArgs const& a)
{
    std::ifstream f(a.in, std::ios::binary);
    if (!f)
        throw Error("cannot open input file " + a.in);
    std::stringstream ss;
    ss << f.rdbuf();
    std::string const text = ss.str();

    std::optional<double> T = a.T;
    if (!T)
    {
        std::istringstream lines(text);
        std::string line;
        while (std::getline(lines, line) && !line.empty() && line[0] == '#')
        {
            auto const pos = line.find(" T_s=");
            if (pos != std::string::npos)
                T = std::stod(line.substr(pos + 5));
        }
    }
    if (!T)
        throw ConfigError("fit: interrogation time unknown; pass --T");

    analysis::FitOptions opt;
    opt.window = ctx.cfg.window;
    if (a.window == "central")
        opt.window = analysis::FitWindow::CentralFringe;
    else if (a.window == "full")
        opt.window = analysis::FitWindow::Full;
    else if (!a.window.empty())
        throw ConfigError("fit: --window must be full or central");

    std::istringstream in(text);
    auto const data = analysis::read_fringe_csv(in, *T, a.label);
    auto const fit = analysis::fit_fringe(data, opt);

    char hash[20];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a64(text)));
    Json body = analysis::to_json(fit);
    body["input_hash"] = hash;
    emit_json(ctx, ctx.g.out_path, body);
}
}  // namespace

//---------------------------------------------------------------------------//
int run(std::vector<std::string> const& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Coherence phase shift simulator for a juggling atomic fountain", "qsi"};
    app.set_version_flag("--version", "qsi 1.0");
    Globals g;
    std::uint64_t seed_value = 0;
    app.add_option("--config", g.config_path, "JSON experiment config")->check(CLI::ExistingFile);
    auto* seed_opt = app.add_option("--seed", seed_value, "64-bit seed (overrides the config)");
    app.add_option("--out", g.out_path, "output file (default: stdout)");
    app.add_flag("--no-noise", g.no_noise, "disable Poisson shot noise");
    app.add_flag("--print-defaults", g.print_defaults, "list every default with its provenance");
    app.add_flag("--no-timestamp", g.no_timestamp, "omit the timestamp from output headers");
    app.add_option("--threads", g.threads, "worker threads (0 = all cores)");
    app.require_subcommand(0, 1);
    app.fallthrough();

    PhaseshiftArgs pa;
    auto* ps = app.add_subcommand("phaseshifts", "phase-shift table of one channel");
    ps->add_option("--channel", pa.channel, "state3 or state4");
    ps->add_option("--k-min", pa.k_min, "smallest wavenumber [1/m]");
    ps->add_option("--k-max", pa.k_max, "largest wavenumber [1/m]");
    ps->add_option("--points", pa.points, "grid points");
    ps->add_option("--l-max", pa.l_max, "highest partial wave");

    auto* vd = app.add_subcommand("veldist", "velocity distributions of Cloud 2");

    std::optional<double> probe_vz;
    auto* fr = app.add_subcommand("fringes", "Ramsey fringes for every signal class");
    fr->add_option("--probe-vz", probe_vz, "probe velocity [m/s]");

    CampaignArgs ca;
    auto* cp = app.add_subcommand("campaign", "phase versus T or Cloud 1 density");
    cp->add_option("--vary", ca.vary, "T or density")->required();
    cp->add_option("--values", ca.values, "parameter values (s or 1/m^3)")->delimiter(',');
    cp->add_option("--points-out", ca.points_out, "per-point CSV (default: next to --out)");

    FitArgs fa;
    auto* ft = app.add_subcommand("fit", "fit a fringe CSV");
    ft->add_option("--in", fa.in, "fringe CSV")->required();
    ft->add_option("--T", fa.T, "interrogation time [s] (default: from the file header)");
    ft->add_option("--class", fa.label, "class column value to fit");
    ft->add_option("--window", fa.window, "full or central");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try
    {
        app.parse(reversed);
    }
    catch (CLI::CallForHelp const&)
    {
        out << app.help();
        return exit_ok;
    }
    catch (CLI::CallForAllHelp const&)
    {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    }
    catch (CLI::CallForVersion const&)
    {
        out << "qsi 1.0\n";
        return exit_ok;
    }
    catch (CLI::ParseError const& e)
    {
        err << "qsi: " << e.what() << '\n';
        return exit_config;
    }

    if (g.print_defaults)
    {
        out << format_defaults();
        return exit_ok;
    }
    if (app.get_subcommands().empty())
    {
        err << "qsi: a subcommand is required (phaseshifts, veldist, fringes, campaign, fit)\n";
        return exit_config;
    }

    try
    {
        ExperimentConfig cfg = g.config_path.empty() ? default_config() : load_config(g.config_path);
        if (*seed_opt)
            cfg.seed = seed_value;
        if (g.no_noise)
            cfg.noise = false;
        cfg.resolved["seed"] = cfg.seed;
        cfg.resolved["noise"] = cfg.noise;
        cfg.setup.sim.workers = g.threads;

        Context ctx{g, std::move(cfg), app.get_subcommands().front()->get_name(), out};
        if (ps->parsed())
            cmd_phaseshifts(ctx, pa);
        else if (vd->parsed())
            cmd_veldist(ctx);
        else if (fr->parsed())
            cmd_fringes(ctx, probe_vz);
        else if (cp->parsed())
            cmd_campaign(ctx, ca);
        else if (ft->parsed())
            cmd_fit(ctx, fa);
        return exit_ok;
    }
    catch (ConfigError const& e)
    {
        err << "qsi: " << e.what() << '\n';
        return exit_config;
    }
    catch (ParameterError const& e)
    {
        err << "qsi: " << e.what() << '\n';
        return exit_config;
    }
    catch (GeometryError const& e)
    {
        err << "qsi: " << e.what() << '\n';
        return exit_config;
    }
    catch (std::exception const& e)
    {
        err << "qsi: " << e.what() << '\n';
        return exit_runtime;
    }
}
}  // namespace qsi::cli
