#include "cftpmix/dist.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cftpmix/errors.hpp"

namespace cftpmix {

double logsumexp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v)
    if (x > m) m = x;
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double inv_std_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) throw usage_error("inv_std_normal_cdf: p outside (0,1)");

  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    double q = p - 0.5;
    double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // One Halley step against the exact CDF.
  double e = std_normal_cdf(x) - p;
  double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  x = x - u / (1.0 + 0.5 * x * u);
  return x;
}

namespace {

// Marsaglia-Tsang for shape >= 1; proposals consume (normal, uniform) pairs.
double gamma_mt_unit_rate(double shape, CellStream& stream) {
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = normal_from_uniform(stream.next());
    double t = 1.0 + c * x;
    if (t <= 0.0) continue;
    double v = t * t * t;
    double u = stream.next();
    double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

}  // namespace

double gamma_from_stream(double shape, double rate, CellStream& stream) {
  if (!(shape > 0.0) || !(rate > 0.0)) throw usage_error("gamma_from_stream: shape and rate must be positive");
  if (shape >= 1.0) return gamma_mt_unit_rate(shape, stream) / rate;
  // Boost trick for shape < 1.
  double g = gamma_mt_unit_rate(shape + 1.0, stream);
  double u = stream.next();
  return g * std::pow(u, 1.0 / shape) / rate;
}

std::vector<double> dirichlet_from_streams(std::span<const double> shapes,
                                           std::span<CellStream> streams) {
  if (shapes.size() != streams.size()) throw usage_error("dirichlet_from_streams: size mismatch");
  std::vector<double> g(shapes.size());
  double total = 0.0;
  for (std::size_t j = 0; j < shapes.size(); ++j) {
    g[j] = gamma_from_stream(shapes[j], 1.0, streams[j]);
    total += g[j];
  }
  if (!(total > 0.0)) throw numerical_degeneracy_error("dirichlet draw degenerated to zero mass");
  for (double& x : g) x /= total;
  return g;
}

double truncated_normal_from_stream(double mean, double sd, Interval iv,
                                    CellStream& stream, std::int64_t budget) {
  if (!(sd > 0.0)) throw usage_error("truncated_normal_from_stream: sd must be positive");
  if (!(iv.lo < iv.hi)) throw usage_error("truncated_normal_from_stream: empty interval");
  for (std::int64_t r = 0; r < budget; ++r) {
    double x = mean + sd * normal_from_uniform(stream.next());
    if (iv.contains(x)) return x;
  }
  throw sampler_stall_error("truncated normal: no acceptance within budget (mean=" +
                            std::to_string(mean) + ", sd=" + std::to_string(sd) + ", interval [" +
                            std::to_string(iv.lo) + "," + std::to_string(iv.hi) + "])");
}

double truncated_gamma_from_stream(double shape, double rate, Interval iv,
                                   CellStream& stream, std::int64_t budget) {
  if (!(iv.lo < iv.hi) || iv.lo < 0.0) throw usage_error("truncated_gamma_from_stream: bad interval");
  // Proposal acceptance is budgeted on accept/reject rounds, not on the
  // uniforms each gamma proposal consumes internally.
  for (std::int64_t r = 0; r < budget; ++r) {
    double x = gamma_from_stream(shape, rate, stream);
    if (iv.contains(x)) return x;
  }
  throw sampler_stall_error("truncated gamma: no acceptance within budget (shape=" +
                            std::to_string(shape) + ", rate=" + std::to_string(rate) +
                            ", interval [" + std::to_string(iv.lo) + "," + std::to_string(iv.hi) + "])");
}

namespace {

// Piecewise-linear upper hull from tangents at the abscissae; log-concavity
// makes every tangent an upper bound.
struct HullPoint {
  double x, logf, dlogf;
};

struct Hull {
  std::vector<HullPoint> pts;  // sorted by x
  Interval iv;

  // Intersection of tangents at pts[i] and pts[i+1].
  double cross(std::size_t i) const {
    const HullPoint &a = pts[i], &b = pts[i + 1];
    if (std::abs(a.dlogf - b.dlogf) < 1e-14) return 0.5 * (a.x + b.x);
    return (b.logf - a.logf - b.x * b.dlogf + a.x * a.dlogf) / (a.dlogf - b.dlogf);
  }

  double upper_at(double x, std::size_t seg) const {
    const HullPoint& p = pts[seg];
    return p.logf + p.dlogf * (x - p.x);
  }

  // Integral weight of exp(tangent_i) over [l, r], scaled by exp(-shift).
  static double seg_mass(const HullPoint& p, double l, double r, double shift) {
    double m = p.dlogf;
    double c = p.logf - p.dlogf * p.x - shift;
    if (std::abs(m) < 1e-12) return std::exp(c) * (r - l);
    return (std::exp(c + m * r) - std::exp(c + m * l)) / m;
  }
};

}  // namespace

double adaptive_rejection_from_stream(const LogConcaveDensity& density, Interval iv,
                                      CellStream& stream, std::int64_t budget) {
  if (!(iv.lo < iv.hi)) throw usage_error("adaptive_rejection_from_stream: empty interval");
  auto lf = [&](double x) { return density.log_f(x, density.ctx); };
  auto dlf = [&](double x) { return density.dlog_f(x, density.ctx); };

  Hull hull;
  hull.iv = iv;
  for (double frac : {0.15, 0.5, 0.85}) {
    double x = iv.lo + frac * iv.width();
    hull.pts.push_back({x, lf(x), dlf(x)});
  }

  for (std::int64_t r = 0; r < budget; ++r) {
    // Segment boundaries: [lo, cross_0, ..., cross_{m-2}, hi].
    std::size_t m = hull.pts.size();
    std::vector<double> bounds(m + 1);
    bounds[0] = iv.lo;
    bounds[m] = iv.hi;
    for (std::size_t i = 0; i + 1 < m; ++i) bounds[i + 1] = std::clamp(hull.cross(i), iv.lo, iv.hi);
    for (std::size_t i = 1; i < m; ++i) bounds[i] = std::max(bounds[i], bounds[i - 1]);

    double shift = hull.pts[m / 2].logf;
    std::vector<double> mass(m);
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      mass[i] = bounds[i + 1] > bounds[i]
                    ? Hull::seg_mass(hull.pts[i], bounds[i], bounds[i + 1], shift)
                    : 0.0;
      total += mass[i];
    }
    if (!(total > 0.0) || !std::isfinite(total))
      throw numerical_degeneracy_error("adaptive rejection: hull mass degenerated");

    // Sample a segment, then invert the exponential segment CDF.
    double u = stream.next() * total;
    std::size_t seg = 0;
    while (seg + 1 < m && u > mass[seg]) {
      u -= mass[seg];
      ++seg;
    }
    const HullPoint& p = hull.pts[seg];
    double l = bounds[seg], rgt = bounds[seg + 1];
    double x;
    double mslope = p.dlogf;
    if (std::abs(mslope) < 1e-12) {
      x = l + (rgt - l) * (u / std::max(mass[seg], 1e-300));
    } else {
      double c = p.logf - mslope * p.x - shift;
      double el = std::exp(c + mslope * l);
      x = (std::log(el + mslope * u) - c) / mslope;
    }
    x = std::clamp(x, l, rgt);

    double logu = std::log(stream.next());
    double fx = lf(x);
    if (logu <= fx - hull.upper_at(x, seg)) return x;

    // Refine the hull at the rejected point.
    auto pos = std::lower_bound(hull.pts.begin(), hull.pts.end(), x,
                                [](const HullPoint& hp, double v) { return hp.x < v; });
    if (pos == hull.pts.end() || std::abs(pos->x - x) > 1e-12)
      hull.pts.insert(pos, {x, fx, dlf(x)});
  }
  throw sampler_stall_error("adaptive rejection: no acceptance within budget");
}

double log_normal_density(double x, double mean, double sd) {
  double z = (x - mean) / sd;
  return -0.5 * kLogTwoPi - std::log(sd) - 0.5 * z * z;
}

double log_gamma_density(double x, double shape, double rate) {
  if (x <= 0.0) return -std::numeric_limits<double>::infinity();
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

namespace {

// Lentz continued fraction for the incomplete beta.
double betacf(double a, double b, double x) {
  const int max_iter = 300;
  const double eps = 3e-15, fpmin = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::abs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= max_iter; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) break;
  }
  return h;
}

}  // namespace

double reg_inc_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw usage_error("reg_inc_beta: parameters must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                 b * std::log1p(-x);
  double bt = std::exp(ln_bt);
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
  return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

}  // namespace cftpmix
