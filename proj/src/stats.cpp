#include "mdma/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "mdma/errors.hpp"

namespace mdma {

double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 0.2) return 1.0;  // series converges slowly and the value is 1 to double precision
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += sign * term;
    if (term < 1e-17) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

TestResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InvalidArgument("KS test needs nonempty samples");
  std::vector<double> sa(a.begin(), a.end());
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < sa.size() && j < sb.size()) {
    const double x = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] == x) ++i;
    while (j < sb.size() && sb[j] == x) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  const double en = std::sqrt(na * nb / (na + nb));
  return {d, kolmogorov_survival((en + 0.12 + 0.11 / en) * d)};
}

TestResult ks_one_sample(std::span<const double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) throw InvalidArgument("KS test needs a nonempty sample");
  std::vector<double> s(sample.begin(), sample.end());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double d = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double f = cdf(s[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  const double en = std::sqrt(n);
  return {d, kolmogorov_survival((en + 0.12 + 0.11 / en) * d)};
}

namespace {

struct TieCounts {
  double pairs = 0.0;  // sum t(t-1)/2
  double t0 = 0.0;     // sum t(t-1)(t-2)
  double t1 = 0.0;     // sum t(t-1)(2t+5)
};

TieCounts count_ties(const std::vector<double>& sorted) {
  TieCounts c;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i + 1;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    c.pairs += t * (t - 1.0) / 2.0;
    c.t0 += t * (t - 1.0) * (t - 2.0);
    c.t1 += t * (t - 1.0) * (2.0 * t + 5.0);
    i = j;
  }
  return c;
}

// Sorts v by merge sort and returns the number of inversions (strictly decreasing pairs).
double merge_count(std::vector<double>& v, std::vector<double>& buf, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0.0;
  const std::size_t mid = lo + (hi - lo) / 2;
  double swaps = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<double>(mid - i);
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + lo, buf.begin() + hi, v.begin() + lo);
  return swaps;
}

}  // namespace

KendallResult kendall_tau(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidArgument("Kendall tau needs paired samples");
  const std::size_t n = x.size();
  if (n < 3) throw InvalidArgument("Kendall tau needs at least 3 pairs");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return x[a] != x[b] ? x[a] < x[b] : y[a] < y[b];
  });
  std::vector<double> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = x[idx[i]];
    ys[i] = y[idx[i]];
  }
  double joint_ties = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && xs[j] == xs[i] && ys[j] == ys[i]) ++j;
    const double t = static_cast<double>(j - i);
    joint_ties += t * (t - 1.0) / 2.0;
    i = j;
  }
  const TieCounts xt = count_ties(xs);
  std::vector<double> buf(n);
  const double discordant = merge_count(ys, buf, 0, n);
  const TieCounts yt = count_ties(ys);

  const double nn = static_cast<double>(n);
  const double total = nn * (nn - 1.0) / 2.0;
  const double excess = total - xt.pairs - yt.pairs + joint_ties - 2.0 * discordant;
  KendallResult r;
  const double denom = std::sqrt((total - xt.pairs) * (total - yt.pairs));
  if (!(denom > 0.0)) return r;  // a constant sample carries no rank information
  r.tau = excess / denom;
  const double m = nn * (nn - 1.0);
  const double var = (m * (2.0 * nn + 5.0) - xt.t1 - yt.t1) / 18.0 +
                     2.0 * xt.pairs * yt.pairs / m + xt.t0 * yt.t0 / (9.0 * m * (nn - 2.0));
  r.z = excess / std::sqrt(var);
  r.p_value = std::clamp(std::erfc(std::abs(r.z) / std::sqrt(2.0)), 0.0, 1.0);
  return r;
}

}  // namespace mdma
