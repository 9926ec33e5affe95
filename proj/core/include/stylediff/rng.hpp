#pragma once

#include <cstdint>

#include "stylediff/tensor.hpp"

namespace stylediff {

// Deterministic, portable random stream (xoshiro256** seeded via splitmix64,
// gaussians via Box-Muller). Not std::normal_distribution: its draw sequence
// is implementation-defined, and checkpoints must be byte-reproducible.
class Rng {
public:
    explicit Rng(uint64_t seed);

    uint64_t next_u64();
    double uniform();                    // [0, 1)
    double uniform(double lo, double hi);
    int uniform_int(int n);              // [0, n)
    double normal();                     // N(0, 1)

    Tensor normal_tensor(std::vector<int> shape);
    Tensor uniform_tensor(std::vector<int> shape, double lo, double hi);

    // Independent substream; fork(k) depends only on the original seed and k.
    Rng fork(uint64_t stream) const;

private:
    uint64_t seed_;
    uint64_t state_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace stylediff
