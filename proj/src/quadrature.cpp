#include "rkl/quadrature.hpp"

#include "rkl/error.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>

namespace rkl::quad {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Kronrod abscissae (positive half, descending) and weights; Gauss 7-point
// weights belong to the odd-indexed abscissae.
constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

double safe_eval(const LogFn& f, double u)
{
    const double v = f(u);
    return std::isnan(v) ? kNegInf : v;
}

struct Piece {
    double a;
    double b;
    std::vector<double> val;
    std::vector<double> err;
    std::vector<double> l1;
};

Piece evaluate_piece(const VectorFn& f, std::size_t dim, double a, double b, std::vector<double>& buf,
                     std::size_t& evaluations)
{
    evaluations += 15;
    Piece p{a, b, std::vector<double>(dim, 0.0), std::vector<double>(dim, 0.0),
            std::vector<double>(dim, 0.0)};
    std::vector<double> gauss(dim, 0.0);
    const double centre = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    auto accumulate = [&](double x, double wk, double wg) {
        f(x, buf);
        for (std::size_t j = 0; j < dim; ++j) {
            const double v = std::isfinite(buf[j]) ? buf[j] : 0.0;
            p.val[j] += wk * v;
            p.l1[j] += wk * std::abs(v);
            gauss[j] += wg * v;
        }
    };
    for (std::size_t i = 0; i < 7; ++i) {
        const double wg = (i % 2 == 1) ? kWg[i / 2] : 0.0;
        accumulate(centre - half * kXgk[i], kWgk[i], wg);
        accumulate(centre + half * kXgk[i], kWgk[i], wg);
    }
    accumulate(centre, kWgk[7], kWg[3]);
    for (std::size_t j = 0; j < dim; ++j) {
        p.val[j] *= half;
        p.l1[j] *= half;
        p.err[j] = std::abs(p.val[j] - gauss[j] * half);
    }
    return p;
}

// Bisects for the point between `inside` and `outside` where log f crosses target.
double bisect_crossing(const LogFn& f, double inside, double outside, double target)
{
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (inside + outside);
        if (safe_eval(f, mid) >= target) {
            inside = mid;
        } else {
            outside = mid;
        }
        if (std::abs(outside - inside) <= 1e-9 * (1.0 + std::abs(inside))) {
            break;
        }
    }
    return outside;
}

struct Edge {
    double at;
    double width;
    bool open;
};

// Walks from the mode in direction dir (+1/-1) until log f drops drop_nats.
Edge find_edge(const LogFn& f, const Window& w, int dir, const Options& opts, double bound)
{
    const double dist_to_bound = std::abs(bound - w.mode);
    if (dist_to_bound <= 0.0) {
        return {w.mode, 1e-6 * (1.0 + std::abs(w.mode)), false};
    }
    // Peak scale: first offset (from 1e-6, doubling) with a drop of 1 nat.
    double width = std::min(1.0, dist_to_bound);
    for (double d = 1e-6; d < dist_to_bound; d *= 2.0) {
        if (safe_eval(f, w.mode + dir * d) < w.log_max - 1.0) {
            width = d;
            break;
        }
        width = d;
    }
    const double target = w.log_max - opts.drop_nats;
    double inside = w.mode;
    for (double d = width; ; d *= 2.0) {
        if (d >= dist_to_bound) {
            const double at = bound;
            if (safe_eval(f, at) >= target) {
                // Domain boundary reached before the drop: a closed edge.
                return {at, width, false};
            }
            return {bisect_crossing(f, inside, at, target), width, false};
        }
        if (d > opts.max_offset) {
            return {w.mode + dir * opts.max_offset, width, true};
        }
        const double x = w.mode + dir * d;
        if (safe_eval(f, x) < target) {
            return {bisect_crossing(f, inside, x, target), width, false};
        }
        inside = x;
    }
}

} // namespace

double log_add_exp(double a, double b)
{
    if (a == kNegInf) {
        return b;
    }
    if (b == kNegInf) {
        return a;
    }
    const double m = std::max(a, b);
    return m + std::log1p(std::exp(-std::abs(a - b)));
}

double log_sum_exp(std::span<const double> values)
{
    double m = kNegInf;
    for (double v : values) {
        m = std::max(m, v);
    }
    if (m == kNegInf || !std::isfinite(m)) {
        return m;
    }
    double s = 0.0;
    for (double v : values) {
        s += std::exp(v - m);
    }
    return m + std::log(s);
}

Window find_window(const LogFn& log_f, double start, const Options& opts, double domain_lo,
                   double domain_hi)
{
    if (!(domain_lo < domain_hi)) {
        throw InvalidArgument("empty integration domain");
    }
    start = std::clamp(start, domain_lo, domain_hi);
    double f0 = safe_eval(log_f, start);
    if (f0 == kNegInf) {
        // Look for any point with positive density.
        bool found = false;
        for (double d = 0.5; d < 2.0 * opts.max_offset && !found; d *= 2.0) {
            for (double cand : {start + d, start - d}) {
                cand = std::clamp(cand, domain_lo, domain_hi);
                const double v = safe_eval(log_f, cand);
                if (v > kNegInf) {
                    start = cand;
                    f0 = v;
                    found = true;
                    break;
                }
            }
        }
        if (!found) {
            throw InvalidArgument("log integrand is -inf everywhere near the start point");
        }
    }

    // Bracket the maximiser by stepping uphill with doubling steps.
    const double search_limit = 2.0 * opts.max_offset;
    double a = start;
    double b = start;
    {
        double h = 0.5;
        const double xr = std::min(start + h, domain_hi);
        const double xl = std::max(start - h, domain_lo);
        const double fr = safe_eval(log_f, xr);
        const double fl = safe_eval(log_f, xl);
        int dir = 0;
        if (fr > f0 && fr >= fl) {
            dir = 1;
        } else if (fl > f0) {
            dir = -1;
        }
        if (dir == 0) {
            a = xl;
            b = xr;
        } else {
            const double bound = dir > 0 ? domain_hi : domain_lo;
            double prev = start;
            double x = dir > 0 ? xr : xl;
            double fx = dir > 0 ? fr : fl;
            while (true) {
                if (x == bound) {
                    a = std::min(prev, x);
                    b = std::max(prev, x);
                    break;
                }
                h *= 2.0;
                double next = x + dir * h;
                if ((dir > 0 && next > bound) || (dir < 0 && next < bound)) {
                    next = bound;
                }
                const double fn = safe_eval(log_f, next);
                if (fn <= fx) {
                    a = std::min(prev, next);
                    b = std::max(prev, next);
                    break;
                }
                if (std::abs(next - start) > search_limit) {
                    throw MomentDivergent("log integrand keeps increasing beyond " +
                                          std::to_string(search_limit) +
                                          " units: integral diverges");
                }
                prev = x;
                x = next;
                fx = fn;
            }
        }
    }

    auto neg = [&](double u) { return -safe_eval(log_f, u); };
    const auto [arg, negmax] = boost::math::tools::brent_find_minima(neg, a, b, 45);
    Window w;
    w.mode = arg;
    w.log_max = -negmax;
    for (double cand : {a, b, start}) {
        const double v = safe_eval(log_f, cand);
        if (v > w.log_max) {
            w.mode = cand;
            w.log_max = v;
        }
    }
    if (!std::isfinite(w.log_max)) {
        throw MomentDivergent("log integrand has no finite maximum");
    }

    const Edge hi = find_edge(log_f, w, +1, opts, domain_hi);
    const Edge lo = find_edge(log_f, w, -1, opts, domain_lo);
    w.hi = hi.at;
    w.hi_open = hi.open;
    w.width_hi = hi.width;
    w.lo = lo.at;
    w.lo_open = lo.open;
    w.width_lo = lo.width;
    return w;
}

std::vector<double> window_breakpoints(const Window& w)
{
    std::vector<double> pts{w.lo, w.mode, w.hi};
    for (double d = w.width_hi; w.mode + d < w.hi; d *= 2.0) {
        pts.push_back(w.mode + d);
    }
    for (double d = w.width_lo; w.mode - d > w.lo; d *= 2.0) {
        pts.push_back(w.mode - d);
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return pts;
}

AdaptiveResult gauss_kronrod(const VectorFn& f, std::size_t dim, std::span<const double> breakpoints,
                             double rel_tol, std::size_t max_intervals)
{
    AdaptiveResult out;
    out.value.assign(dim, 0.0);
    out.abs_error.assign(dim, 0.0);
    out.l1.assign(dim, 0.0);
    if (breakpoints.size() < 2) {
        out.converged = true;
        return out;
    }
    std::vector<double> buf(dim);
    std::vector<Piece> pieces;
    for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
        if (breakpoints[i + 1] > breakpoints[i]) {
            pieces.push_back(evaluate_piece(f, dim, breakpoints[i], breakpoints[i + 1], buf, out.evaluations));
        }
    }
    constexpr double kTiny = 1e-300;
    while (true) {
        std::fill(out.value.begin(), out.value.end(), 0.0);
        std::fill(out.abs_error.begin(), out.abs_error.end(), 0.0);
        std::fill(out.l1.begin(), out.l1.end(), 0.0);
        for (const auto& p : pieces) {
            for (std::size_t j = 0; j < dim; ++j) {
                out.value[j] += p.val[j];
                out.abs_error[j] += p.err[j];
                out.l1[j] += p.l1[j];
            }
        }
        bool done = true;
        for (std::size_t j = 0; j < dim; ++j) {
            if (out.abs_error[j] > rel_tol * out.l1[j] + kTiny) {
                done = false;
            }
        }
        if (done) {
            out.converged = true;
            break;
        }
        if (pieces.size() >= max_intervals) {
            break;
        }
        std::size_t worst = 0;
        double worst_score = -1.0;
        for (std::size_t i = 0; i < pieces.size(); ++i) {
            double score = 0.0;
            for (std::size_t j = 0; j < dim; ++j) {
                score = std::max(score, pieces[i].err[j] / (out.l1[j] + kTiny));
            }
            if (score > worst_score) {
                worst_score = score;
                worst = i;
            }
        }
        const Piece old = pieces[worst];
        const double mid = 0.5 * (old.a + old.b);
        if (!(mid > old.a && mid < old.b)) {
            break; // interval cannot be split further in double precision
        }
        pieces[worst] = evaluate_piece(f, dim, old.a, mid, buf, out.evaluations);
        pieces.push_back(evaluate_piece(f, dim, mid, old.b, buf, out.evaluations));
    }
    std::sort(pieces.begin(), pieces.end(), [](const Piece& x, const Piece& y) { return x.a < y.a; });
    out.intervals = pieces.size();
    out.nodes.reserve(pieces.size() * 15);
    out.weights.reserve(pieces.size() * 15);
    for (const auto& p : pieces) {
        const double centre = 0.5 * (p.a + p.b);
        const double half = 0.5 * (p.b - p.a);
        for (std::size_t i = 0; i < 7; ++i) {
            out.nodes.push_back(centre - half * kXgk[i]);
            out.weights.push_back(half * kWgk[i]);
        }
        out.nodes.push_back(centre);
        out.weights.push_back(half * kWgk[7]);
        for (std::size_t i = 7; i-- > 0;) {
            out.nodes.push_back(centre + half * kXgk[i]);
            out.weights.push_back(half * kWgk[i]);
        }
    }
    return out;
}

LogIntegral integrate_log(const LogFn& log_f, double start, const Options& opts, double domain_lo,
                          double domain_hi, const std::function<double(double)>& factor)
{
    LogIntegral result;
    result.window = find_window(log_f, start, opts, domain_lo, domain_hi);
    const Window& w = result.window;

    auto run = [&](double lo, double hi) {
        Window clipped = w;
        clipped.lo = lo;
        clipped.hi = hi;
        const auto pts = window_breakpoints(clipped);
        auto integrand = [&](double u, std::span<double> out) {
            out[0] = std::exp(safe_eval(log_f, u) - w.log_max);
            if (factor) {
                out[0] *= factor(u);
            }
        };
        auto r = gauss_kronrod(integrand, 1, pts, opts.rel_tol, opts.max_intervals);
        result.evaluations += r.evaluations;
        result.intervals = r.intervals;
        result.rel_error = r.l1[0] > 0.0 ? r.abs_error[0] / r.l1[0] : 0.0;
        return r.value[0];
    };

    double value = 0.0;
    if (!w.lo_open && !w.hi_open) {
        value = run(w.lo, w.hi);
    } else {
        // Grow open truncation bounds by successive doublings.
        double previous = 0.0;
        double change = 0.0;
        for (int i = 0; i < 4; ++i) {
            const double scale = std::ldexp(1.0, i - 3);
            const double lo = w.lo_open ? w.mode - scale * opts.max_offset : w.lo;
            const double hi = w.hi_open ? w.mode + scale * opts.max_offset : w.hi;
            value = run(lo, hi);
            if (i > 0) {
                change = std::abs(value - previous) / std::abs(value);
            }
            previous = value;
        }
        if (change > opts.stability_tol) {
            throw MomentDivergent("integral does not stabilise as the truncation bound grows "
                                  "(relative change " + std::to_string(change) + ")");
        }
    }
    result.sign = value < 0.0 ? -1 : 1;
    result.log_value = value != 0.0 ? w.log_max + std::log(std::abs(value)) : kNegInf;
    return result;
}

Rule normalized_rule(const LogFn& log_f, std::span<const LogFn> tilts, double start, const Options& opts)
{
    std::vector<LogFn> fns{log_f};
    for (const auto& t : tilts) {
        fns.push_back([&log_f, &t](double u) { return log_f(u) + t(u); });
    }
    std::vector<Window> windows;
    for (const auto& f : fns) {
        Window w = find_window(f, start, opts);
        if (w.lo_open || w.hi_open) {
            // Throws MomentDivergent when the tail does not settle.
            integrate_log(f, start, opts);
        }
        windows.push_back(w);
    }
    const double base = windows.front().log_max;
    std::vector<double> pts;
    for (const auto& w : windows) {
        const auto b = window_breakpoints(w);
        pts.insert(pts.end(), b.begin(), b.end());
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

    std::vector<double> shift(fns.size());
    for (std::size_t j = 0; j < fns.size(); ++j) {
        shift[j] = windows[j].log_max - base;
    }
    auto integrand = [&](double u, std::span<double> out) {
        const double v = safe_eval(log_f, u) - base;
        out[0] = std::exp(v);
        for (std::size_t j = 1; j < fns.size(); ++j) {
            out[j] = std::exp(v + tilts[j - 1](u) - shift[j]);
        }
    };
    const auto r = gauss_kronrod(integrand, fns.size(), pts, opts.rel_tol, opts.max_intervals);

    Rule rule;
    rule.intervals = r.intervals;
    rule.evaluations = r.evaluations + r.nodes.size();
    double total = 0.0;
    for (std::size_t i = 0; i < r.nodes.size(); ++i) {
        const double w = r.weights[i] * std::exp(safe_eval(log_f, r.nodes[i]) - base);
        if (w > 0.0 && std::isfinite(w)) {
            rule.nodes.push_back(r.nodes[i]);
            rule.weights.push_back(w);
            total += w;
        }
    }
    if (!(total > 0.0)) {
        throw Error("quadrature rule has no mass");
    }
    for (double& w : rule.weights) {
        w /= total;
    }
    return rule;
}

} // namespace rkl::quad
