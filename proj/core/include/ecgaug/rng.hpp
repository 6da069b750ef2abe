#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "ecgaug/tensor.hpp"

namespace ecgaug {

// Self-contained deterministic generator (splitmix64 stream + Marsaglia polar
// normals). Identical seeds give identical streams on any platform with IEEE
// doubles, which the reproducibility contracts depend on.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64();
    double uniform();                       // [0, 1)
    double uniform(double lo, double hi);
    double normal();                        // mean 0, std 1
    double normal(double mean, double std);
    int64_t below(int64_t n);               // [0, n)

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(static_cast<int64_t>(i)));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

uint64_t fnv1a64(std::string_view s);

// Stage/class-scoped sub-seed from a master seed; documented so runs can be
// reproduced piecewise.
uint64_t derive_seed(uint64_t master, std::string_view scope);

// Fills a leaf tensor with N(mean, std) draws, deterministic per (seed, name).
void init_normal(Tensor& t, double mean, double std, uint64_t seed, std::string_view name);

} // namespace ecgaug
