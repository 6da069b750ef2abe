#include "ecgaug/rng.hpp"

#include <cmath>

namespace ecgaug {

uint64_t Rng::next_u64() {
    // splitmix64
    uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
}

double Rng::normal(double mean, double std) { return mean + std * normal(); }

int64_t Rng::below(int64_t n) {
    if (n <= 0) throw Error("Rng::below: non-positive bound");
    // modulo bias is < 2^-50 for any realistic n
    return static_cast<int64_t>(next_u64() % static_cast<uint64_t>(n));
}

uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

uint64_t derive_seed(uint64_t master, std::string_view scope) {
    uint64_t h = fnv1a64(scope);
    // one splitmix64 scramble of the combined value
    uint64_t z = master ^ (h + 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

void init_normal(Tensor& t, double mean, double std, uint64_t seed, std::string_view name) {
    Rng rng(derive_seed(seed, name));
    auto out = t.raw_data();
    if (std == 0.0) {
        for (double& v : out) v = mean;
        return;
    }
    for (double& v : out) v = rng.normal(mean, std);
}

} // namespace ecgaug
