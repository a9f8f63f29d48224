#include "fsde/noise.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace fsde {

namespace {

// Philox4x32-10 counter-based generator (Salmon et al.). One 128-bit counter
// block per table entry, keyed by the seed.
struct PhiloxBlock {
    std::uint32_t v[4];
};

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

PhiloxBlock philox4x32(std::uint64_t key, std::uint64_t counter) {
    constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
    std::uint32_t c0 = static_cast<std::uint32_t>(counter);
    std::uint32_t c1 = static_cast<std::uint32_t>(counter >> 32);
    std::uint32_t c2 = 0, c3 = 0;
    std::uint32_t k0 = static_cast<std::uint32_t>(key);
    std::uint32_t k1 = static_cast<std::uint32_t>(key >> 32);
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(M0, c0, hi0, lo0);
        mulhilo(M1, c2, hi1, lo1);
        const std::uint32_t n0 = hi1 ^ c1 ^ k0;
        const std::uint32_t n1 = lo1;
        const std::uint32_t n2 = hi0 ^ c3 ^ k1;
        const std::uint32_t n3 = lo0;
        c0 = n0; c1 = n1; c2 = n2; c3 = n3;
        k0 += W0;
        k1 += W1;
    }
    return {{c0, c1, c2, c3}};
}

inline double to_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32) | lo;
    return static_cast<double>(bits >> 11) * 0x1.0p-53; // [0, 1)
}

// One standard normal per counter via Box-Muller on the 128-bit block.
double normal_at(std::uint64_t key, std::uint64_t counter) {
    const PhiloxBlock b = philox4x32(key, counter);
    const double u1 = to_unit(b.v[0], b.v[1]);
    const double u2 = to_unit(b.v[2], b.v[3]);
    return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

} // namespace

WienerIncrements WienerIncrements::sample(std::uint64_t seed, int steps, int N, int dim,
                                          double dt) {
    if (steps <= 0 || N <= 0 || dim <= 0 || dt <= 0.0)
        throw std::invalid_argument("WienerIncrements::sample: invalid shape");
    WienerIncrements w;
    w.seed = seed;
    w.dt = dt;
    w.steps = steps;
    w.N = N;
    w.dim = dim;
    w.data.resize(N * dim, steps);
    const double sqrt_dt = std::sqrt(dt);
    const std::uint64_t row_count = static_cast<std::uint64_t>(N) * dim;
    for (int m = 0; m < steps; ++m)
        for (std::uint64_t row = 0; row < row_count; ++row)
            w.data(static_cast<int>(row), m) =
                sqrt_dt * normal_at(seed, static_cast<std::uint64_t>(m) * row_count + row);
    return w;
}

WienerIncrements WienerIncrements::coarsen(int k) const {
    if (k <= 0 || steps % k != 0)
        throw std::invalid_argument("WienerIncrements::coarsen: k must divide steps");
    WienerIncrements w;
    w.seed = seed;
    w.dt = dt * k;
    w.steps = steps / k;
    w.N = N;
    w.dim = dim;
    w.data.resize(N * dim, w.steps);
    for (int m = 0; m < w.steps; ++m)
        w.data.col(m) = data.middleCols(m * k, k).rowwise().sum();
    return w;
}

WienerIncrements WienerIncrements::spatial_coarsen(int ks) const {
    if (ks <= 0 || (N + 1) % ks != 0)
        throw std::invalid_argument("WienerIncrements::spatial_coarsen: ks must divide N + 1");
    const int Nc = (N + 1) / ks - 1;
    if (Nc < 1) throw std::invalid_argument("WienerIncrements::spatial_coarsen: too coarse");
    WienerIncrements w;
    w.seed = seed;
    w.dt = dt;
    w.steps = steps;
    w.N = Nc;
    w.dim = dim;
    w.data.setZero(Nc * dim, steps);
    const double scale = 1.0 / std::sqrt(static_cast<double>(ks));
    // Coarse cell i = 1..Nc covers fine cells j = ks*i .. ks*i + ks - 1; the
    // first ks - 1 fine cells belong to the coarse ghost cell and drop out.
    for (int i = 1; i <= Nc; ++i)
        for (int j = ks * i; j < ks * i + ks; ++j)
            w.data.middleRows(dim * (i - 1), dim) +=
                scale * data.middleRows(dim * (j - 1), dim);
    return w;
}

void WienerIncrements::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("WienerIncrements::save: cannot open " + path);
    out.write("FSDEW1", 6);
    const std::uint64_t m = steps, n = N, d = dim;
    out.write(reinterpret_cast<const char*>(&m), 8);
    out.write(reinterpret_cast<const char*>(&n), 8);
    out.write(reinterpret_cast<const char*>(&d), 8);
    out.write(reinterpret_cast<const char*>(&dt), 8);
    out.write(reinterpret_cast<const char*>(&seed), 8);
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(sizeof(double) * data.size()));
    if (!out) throw std::runtime_error("WienerIncrements::save: write failed");
}

WienerIncrements WienerIncrements::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("WienerIncrements::load: cannot open " + path);
    char magic[6];
    in.read(magic, 6);
    if (!in || std::memcmp(magic, "FSDEW1", 6) != 0)
        throw std::runtime_error("WienerIncrements::load: bad magic");
    std::uint64_t m, n, d;
    WienerIncrements w;
    in.read(reinterpret_cast<char*>(&m), 8);
    in.read(reinterpret_cast<char*>(&n), 8);
    in.read(reinterpret_cast<char*>(&d), 8);
    in.read(reinterpret_cast<char*>(&w.dt), 8);
    in.read(reinterpret_cast<char*>(&w.seed), 8);
    w.steps = static_cast<int>(m);
    w.N = static_cast<int>(n);
    w.dim = static_cast<int>(d);
    w.data.resize(w.N * w.dim, w.steps);
    in.read(reinterpret_cast<char*>(w.data.data()),
            static_cast<std::streamsize>(sizeof(double) * w.data.size()));
    if (!in) throw std::runtime_error("WienerIncrements::load: truncated file");
    return w;
}

} // namespace fsde
