#include "stylediff/rng.hpp"

#include <cmath>

namespace stylediff {

namespace {

uint64_t splitmix64(uint64_t& x) {
    x += 0x9E3779B97F4A7C15ull;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(uint64_t seed) : seed_(seed) {
    uint64_t s = seed;
    for (auto& w : state_) w = splitmix64(s);
}

uint64_t Rng::next_u64() {
    uint64_t result = rotl(state_[1] * 5, 7) * 9;
    uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int Rng::uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<uint64_t>(n)); }

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

Tensor Rng::normal_tensor(std::vector<int> shape) {
    Tensor t(std::move(shape));
    double* p = t.data();
    for (int64_t i = 0; i < t.size(); ++i) p[i] = normal();
    return t;
}

Tensor Rng::uniform_tensor(std::vector<int> shape, double lo, double hi) {
    Tensor t(std::move(shape));
    double* p = t.data();
    for (int64_t i = 0; i < t.size(); ++i) p[i] = uniform(lo, hi);
    return t;
}

Rng Rng::fork(uint64_t stream) const {
    uint64_t s = seed_ ^ (0xA0761D6478BD642Full * (stream + 1));
    return Rng(splitmix64(s));
}

}  // namespace stylediff
