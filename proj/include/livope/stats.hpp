#ifndef LIVOPE_STATS_HPP
#define LIVOPE_STATS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "livope/error.hpp"

namespace livope::stats {

inline double mean(std::span<const double> x) {
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Unbiased sample variance.
inline double variance(std::span<const double> x) {
    const double m = mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size() - 1);
}

struct WelchResult {
    double t;
    double dof;
    double p;
};

/// Two-sided Welch test of mean(a) - mean(b).
inline WelchResult welch_t(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) throw DomainError("Welch test needs at least two observations per sample");
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    const double va = variance(a) / na, vb = variance(b) / nb;
    const double diff = mean(a) - mean(b);
    const double se2 = va + vb;
    if (se2 == 0.0) {
        if (diff == 0.0) return {0.0, na + nb - 2.0, 1.0};
        return {diff > 0 ? INFINITY : -INFINITY, na + nb - 2.0, 0.0};
    }
    const double t = diff / std::sqrt(se2);
    const double dof = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    boost::math::students_t dist(dof);
    const double p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
    return {t, dof, std::min(1.0, p)};
}

struct OmnibusResult {
    double statistic;
    double p;
};

/// Alexander-Govern test for equal means under unequal variances. Each
/// group's t against the precision-weighted grand mean is normalized with the
/// Hill approximation and the squares are summed.
inline OmnibusResult alexander_govern(const std::vector<std::vector<double>>& groups) {
    if (groups.size() < 2) throw DomainError("Alexander-Govern needs at least two groups");
    const std::size_t k = groups.size();
    std::vector<double> means(k), se(k), w(k);
    double wsum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        if (groups[i].size() < 2) throw DomainError("Alexander-Govern needs at least two observations per group");
        means[i] = mean(groups[i]);
        se[i] = std::sqrt(variance(groups[i]) / static_cast<double>(groups[i].size()));
        if (!(se[i] > 0.0)) throw DomainError("Alexander-Govern group has zero variance");
        w[i] = 1.0 / (se[i] * se[i]);
        wsum += w[i];
    }
    double grand = 0.0;
    for (std::size_t i = 0; i < k; ++i) grand += w[i] / wsum * means[i];
    double a_stat = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double t = (means[i] - grand) / se[i];
        const double v = static_cast<double>(groups[i].size()) - 1.0;
        const double a = v - 0.5;
        const double b = 48.0 * a * a;
        const double c = std::sqrt(a * std::log1p(t * t / v));
        const double c3 = c * c * c, c5 = c3 * c * c, c7 = c5 * c * c;
        const double z = c + (c3 + 3.0 * c) / b -
                         (4.0 * c7 + 33.0 * c5 + 240.0 * c3 + 855.0 * c) / (10.0 * b * b + 8.0 * b * c * c * c * c + 1000.0 * b);
        a_stat += z * z;
    }
    boost::math::chi_squared dist(static_cast<double>(k - 1));
    return {a_stat, boost::math::cdf(boost::math::complement(dist, a_stat))};
}

/// Step-up procedure; returns rejected indices in ascending index order.
/// Ties in p are broken by original index.
inline std::vector<std::size_t> benjamini_hochberg(std::span<const double> pvals, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
    for (double p : pvals)
        if (!(p >= 0.0 && p <= 1.0)) throw DomainError("p-values must lie in [0, 1]");
    const std::size_t m = pvals.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return pvals[x] < pvals[y]; });
    std::size_t cut = 0;
    for (std::size_t i = 0; i < m; ++i)
        if (pvals[order[i]] <= static_cast<double>(i + 1) / static_cast<double>(m) * alpha) cut = i + 1;
    std::vector<std::size_t> rejected(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cut));
    std::sort(rejected.begin(), rejected.end());
    return rejected;
}

} // namespace livope::stats

#endif
