#include "ecgaug/dtw.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ecgaug/error.hpp"

namespace ecgaug {

double dtw(std::span<const double> a, std::span<const double> b) {
    size_t n = a.size(), m = b.size();
    if (n == 0 || m == 0) throw Error("dtw: empty series");

    constexpr double inf = std::numeric_limits<double>::infinity();
    // two-row dynamic program over the (n+1) x (m+1) cumulative-cost table
    std::vector<double> prev(m + 1, inf), cur(m + 1, inf);
    prev[0] = 0.0;
    for (size_t i = 1; i <= n; ++i) {
        cur[0] = inf;
        double ai = a[i - 1];
        for (size_t j = 1; j <= m; ++j) {
            double cost = std::fabs(ai - b[j - 1]);
            double best = std::min({prev[j], cur[j - 1], prev[j - 1]});
            cur[j] = cost + best;
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

} // namespace ecgaug
