#pragma once

// Independent brute-force rederivation of query-mode LOF from the
// k-distance / reachability-distance / lrd definitions. Deliberately naive:
// every quantity is recomputed from scratch with O(n^2) loops so the test
// suite can audit the production implementation against it.

#include <algorithm>
#include <cmath>
#include <vector>

namespace lof_oracle {

using Point = std::vector<double>;

inline double dist(const Point& a, const Point& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

// neighbors of q among refs (excluding exclude_idx), all ties at the k-th
// distance included
inline std::vector<std::size_t> neighborhood(const std::vector<Point>& refs, const Point& q,
                                             std::size_t k, std::ptrdiff_t exclude_idx = -1) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t i = 0; i < refs.size(); ++i) {
        if (exclude_idx >= 0 && i == static_cast<std::size_t>(exclude_idx)) continue;
        d.emplace_back(dist(refs[i], q), i);
    }
    std::sort(d.begin(), d.end());
    double kth = d[k - 1].first;
    std::vector<std::size_t> out;
    for (const auto& [dd, i] : d)
        if (dd <= kth) out.push_back(i);
    return out;
}

inline double k_distance(const std::vector<Point>& refs, std::size_t idx, std::size_t k) {
    std::vector<double> d;
    for (std::size_t i = 0; i < refs.size(); ++i)
        if (i != idx) d.push_back(dist(refs[i], refs[idx]));
    std::sort(d.begin(), d.end());
    return d[k - 1];
}

inline double lrd_of_reference(const std::vector<Point>& refs, std::size_t idx, std::size_t k) {
    auto nb = neighborhood(refs, refs[idx], k, static_cast<std::ptrdiff_t>(idx));
    double sum = 0.0;
    for (std::size_t o : nb)
        sum += std::max(k_distance(refs, o, k), dist(refs[idx], refs[o]));
    return static_cast<double>(nb.size()) / sum;
}

inline double lrd_of_query(const std::vector<Point>& refs, const Point& q, std::size_t k) {
    auto nb = neighborhood(refs, q, k);
    double sum = 0.0;
    for (std::size_t o : nb) sum += std::max(k_distance(refs, o, k), dist(q, refs[o]));
    return static_cast<double>(nb.size()) / sum;
}

inline double score(const std::vector<Point>& refs, const Point& q, std::size_t k) {
    auto nb = neighborhood(refs, q, k);
    double lrd_q = lrd_of_query(refs, q, k);
    double sum = 0.0;
    for (std::size_t o : nb) sum += lrd_of_reference(refs, o, k) / lrd_q;
    return sum / static_cast<double>(nb.size());
}

}  // namespace lof_oracle
