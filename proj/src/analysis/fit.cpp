#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "qsi/analysis/analysis.hpp"
#include "qsi/core/constants.hpp"
#include "qsi/core/errors.hpp"

namespace qsi::analysis
{
namespace
{
namespace c = qsi::constants;

using Vec3d = Eigen::Vector3d;
using Mat3d = Eigen::Matrix3d;

struct Problem
{
    std::vector<double> x;  // 2 pi nu T
    std::vector<double> y;
    std::vector<double> w;  // 1 / sigma
};

struct Normal
{
    Mat3d H = Mat3d::Zero();
    Vec3d g = Vec3d::Zero();
    double chi2 = 0;
};

double chi2_at(Problem const& pr, Vec3d const& p)
{
    double chi2 = 0;
    for (std::size_t i = 0; i < pr.x.size(); ++i)
    {
        double const m = p[0] + p[1] * 0.5 * (1 - std::cos(pr.x[i] + p[2]));
        double const r = (pr.y[i] - m) * pr.w[i];
        chi2 += r * r;
    }
    return chi2;
}

Normal normal_at(Problem const& pr, Vec3d const& p)
{
    Normal n;
    for (std::size_t i = 0; i < pr.x.size(); ++i)
    {
        double const ph = pr.x[i] + p[2];
        double const b = 0.5 * (1 - std::cos(ph));
        Vec3d const j{pr.w[i], pr.w[i] * b, pr.w[i] * 0.5 * p[1] * std::sin(ph)};
        double const r = (pr.y[i] - p[0] - p[1] * b) * pr.w[i];
        n.H.noalias() += j * j.transpose();
        n.g += j * r;
        n.chi2 += r * r;
    }
    return n;
}

// offset and amplitude by linear least squares at fixed phase
Vec3d linear_start(Problem const& pr, double phi)
{
    double s00 = 0, s01 = 0, s11 = 0, t0 = 0, t1 = 0;
    for (std::size_t i = 0; i < pr.x.size(); ++i)
    {
        double const w2 = pr.w[i] * pr.w[i];
        double const b = 0.5 * (1 - std::cos(pr.x[i] + phi));
        s00 += w2;
        s01 += w2 * b;
        s11 += w2 * b * b;
        t0 += w2 * pr.y[i];
        t1 += w2 * b * pr.y[i];
    }
    double const det = s00 * s11 - s01 * s01;
    if (!(std::abs(det) > 0))
        return {t0 / s00, 0.0, phi};
    return {(s11 * t0 - s01 * t1) / det, (s00 * t1 - s01 * t0) / det, phi};
}

struct Attempt
{
    Vec3d p;
    double chi2 = 0;
    bool converged = false;
    int iterations = 0;
    double gradient_measure = 0;
    std::string stop;
};

// GN step expressed in standard errors; inf when H is singular
double gn_measure(Normal const& n)
{
    Eigen::LDLT<Mat3d> ldlt(n.H);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()
        || n.H.diagonal().minCoeff() <= 0)
        return std::numeric_limits<double>::infinity();
    Mat3d const cov = n.H.inverse();
    Vec3d const step = ldlt.solve(n.g);
    double m = 0;
    for (int j = 0; j < 3; ++j)
    {
        if (!(cov(j, j) > 0))
            return std::numeric_limits<double>::infinity();
        m = std::max(m, std::abs(step[j]) / std::sqrt(cov(j, j)));
    }
    return m;
}

double step_measure(Vec3d const& step, Mat3d const& H)
{
    Mat3d const cov = H.inverse();
    double m = 0;
    for (int j = 0; j < 3; ++j)
    {
        double const s = cov(j, j) > 0 ? std::sqrt(cov(j, j)) : 0.0;
        m = std::max(m, s > 0 ? std::abs(step[j]) / s : std::numeric_limits<double>::infinity());
    }
    return m;
}

Attempt levenberg_marquardt(Problem const& pr, Vec3d p, FitOptions const& opt)
{
    Attempt at;
    double lambda = 1e-3;
    Normal n = normal_at(pr, p);
    double last_step = std::numeric_limits<double>::infinity();
    for (int it = 1; it <= opt.max_iterations; ++it)
    {
        at.iterations = it;
        Mat3d A = n.H;
        double const dmax = n.H.diagonal().maxCoeff();
        for (int j = 0; j < 3; ++j)
            A(j, j) += lambda * std::max(n.H(j, j), 1e-15 * dmax);
        Vec3d const step = A.ldlt().solve(n.g);
        Vec3d const trial = p + step;
        double const chi2_trial = chi2_at(pr, trial);
        if (std::isfinite(chi2_trial) && chi2_trial < n.chi2)
        {
            p = trial;
            n = normal_at(pr, p);
            last_step = step_measure(step, n.H);
            lambda = std::max(lambda / 10, 1e-15);
            double const gm = gn_measure(n);
            if (gm <= opt.gradient_tolerance && last_step <= opt.step_tolerance)
            {
                at.converged = true;
                at.stop = "step and gradient below tolerance";
                at.gradient_measure = gm;
                break;
            }
        }
        else
        {
            lambda *= 10;
            if (lambda > 1e16)
            {
                // no representable improvement: the step criterion holds trivially
                at.gradient_measure = gn_measure(n);
                at.converged = at.gradient_measure <= opt.gradient_tolerance;
                at.stop = at.converged ? "chi2 at machine precision" : "damping diverged";
                break;
            }
        }
    }
    if (at.stop.empty())
    {
        at.gradient_measure = gn_measure(n);
        at.stop = "iteration limit";
    }
    at.p = p;
    at.chi2 = n.chi2;
    return at;
}
}  // namespace

double fringe_model(double detuning_hz, double T, double offset, double amp, double phi)
{
    return offset + amp * 0.5 * (1 - std::cos(c::two_pi * detuning_hz * T + phi));
}

double wrap_phase(double phi)
{
    double r = std::remainder(phi, c::two_pi);
    if (r <= -c::pi)
        r += c::two_pi;
    return r;
}

FitResult fit_fringe(FringeData const& data, FitOptions const& options)
{
    double const T = data.interrogation_time;
    if (!(T > 0) || !std::isfinite(T))
        throw ParameterError("fit_fringe: interrogation time must be positive");

    Problem pr;
    bool any_zero = false, any_positive = false;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (auto const& pt : data.points)
    {
        if (options.window == FitWindow::CentralFringe && std::abs(pt.detuning_hz) * T > 0.5 + 1e-9)
            continue;
        if (!std::isfinite(pt.y) || !std::isfinite(pt.detuning_hz) || !std::isfinite(pt.sigma)
            || pt.sigma < 0)
            throw ParameterError("fit_fringe: non-finite value or negative sigma at detuning "
                                 + std::to_string(pt.detuning_hz));
        any_zero = any_zero || pt.sigma == 0;
        any_positive = any_positive || pt.sigma > 0;
        pr.x.push_back(c::two_pi * pt.detuning_hz * T);
        pr.y.push_back(pt.y);
        pr.w.push_back(pt.sigma);
        lo = std::min(lo, pt.detuning_hz);
        hi = std::max(hi, pt.detuning_hz);
    }
    if (any_zero && any_positive)
        throw ParameterError("fit_fringe: sigma must be positive for every point or zero for all");
    bool const unweighted = !any_positive;
    for (double& w : pr.w)
        w = unweighted ? 1.0 : 1.0 / w;

    std::size_t const n = pr.x.size();
    if (n < 8)
        throw ParameterError("fit_fringe: need at least 8 points, got " + std::to_string(n));
    if ((hi - lo) * T < 1 - 1e-9)
        throw ParameterError("fit_fringe: detuning span covers less than one fringe period");

    std::vector<Attempt> attempts;
    for (double phi0 : {0.0, 0.5 * c::pi, -0.5 * c::pi, c::pi})
        attempts.push_back(levenberg_marquardt(pr, linear_start(pr, phi0), options));

    Attempt const* best = nullptr;
    for (auto const& a : attempts)
        if (a.converged && (!best || a.chi2 < best->chi2))
            best = &a;
    if (!best)
    {
        std::ostringstream msg;
        msg << "fit_fringe: no start converged";
        for (auto const& a : attempts)
            msg << "; [chi2=" << a.chi2 << " iterations=" << a.iterations
                << " gradient=" << a.gradient_measure << " stop=" << a.stop << ']';
        throw FitError(msg.str());
    }

    Vec3d p = best->p;
    if (p[1] < 0)
    {
        p[0] += p[1];
        p[1] = -p[1];
        p[2] += c::pi;
    }
    p[2] = wrap_phase(p[2]);
    Normal const fin = normal_at(pr, p);
    Mat3d cov = fin.H.inverse();

    FitResult r;
    r.points_used = n;
    r.dof = static_cast<int>(n) - 3;
    r.chi2 = fin.chi2;
    r.chi2_per_dof = fin.chi2 / r.dof;
    if (unweighted)
    {
        cov *= r.chi2_per_dof;
        r.warnings.push_back("no uncertainties given: covariance scaled by chi2/dof");
    }
    r.offset = p[0];
    r.amp = p[1];
    r.phi = p[2];
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            r.covariance[3 * i + j] = cov(i, j);
    r.offset_err = std::sqrt(cov(0, 0));
    r.amp_err = std::sqrt(cov(1, 1));
    r.phi_err = std::sqrt(cov(2, 2));
    r.converged = true;
    r.iterations = best->iterations;
    r.interrogation_time = T;
    r.label = data.label;
    if (!(r.amp > 2 * r.amp_err))
    {
        r.low_contrast = true;
        r.warnings.push_back("low contrast: amplitude within 2 sigma of zero");
    }
    if (!std::isfinite(r.chi2_per_dof))
        throw FitError("fit_fringe: non-finite chi2");
    return r;
}
}  // namespace qsi::analysis
