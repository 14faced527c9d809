#include "lanp/rng.hpp"

#include <cstdio>
#include <stdexcept>

#include "lanp/errors.hpp"

namespace lanp {

namespace {

constexpr std::uint64_t kMultHi = 2549297995355413924ULL;
constexpr std::uint64_t kMultLo = 4865540595714422341ULL;

inline unsigned __int128 pcg_mult() {
    return ((unsigned __int128)kMultHi << 64) | kMultLo;
}

inline std::uint64_t rotr64(std::uint64_t v, unsigned rot) {
    return (v >> rot) | (v << ((-rot) & 63));
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream) {
    inc_ = ((u128)stream << 1u) | 1u;
    state_ = 0;
    advance();
    state_ += (u128)seed;
    advance();
}

void RngStream::advance() { state_ = state_ * pcg_mult() + inc_; }

std::uint64_t RngStream::next_u64() {
    advance();
    std::uint64_t xored = (std::uint64_t)(state_ >> 64) ^ (std::uint64_t)state_;
    unsigned rot = (unsigned)(state_ >> 122);
    return rotr64(xored, rot);
}

double RngStream::uniform01() {
    return (double)(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform_open01() {
    return ((double)(next_u64() >> 12) + 0.5) * 0x1.0p-52;
}

double RngStream::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
}

std::uint64_t RngStream::uniform_int(std::uint64_t n) {
    if (n == 0) throw DomainError("uniform_int: n must be positive");
    std::uint64_t bound = n * ((~std::uint64_t{0}) / n);
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= bound);
    return x % n;
}

double RngStream::normal() { return normal_quantile(uniform_open01()); }

Tensor RngStream::normal_row(std::size_t n) {
    Tensor t({1, n});
    for (std::size_t i = 0; i < n; ++i) t[i] = normal();
    return t;
}

std::vector<std::size_t> RngStream::sample_without_replacement(std::size_t n, std::size_t k) {
    if (k > n) throw DomainError("sample_without_replacement: k > n");
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    std::vector<std::size_t> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + (std::size_t)uniform_int(n - i);
        std::swap(pool[i], pool[j]);
        out.push_back(pool[i]);
    }
    return out;
}

RngStream RngStream::substream(std::uint64_t tag) const {
    return RngStream(seed_, splitmix64(stream_ ^ splitmix64(tag)));
}

std::string RngStream::state_hex() const {
    char buf[65];
    std::snprintf(buf, sizeof(buf), "%016llx%016llx%016llx%016llx",
                  (unsigned long long)(state_ >> 64), (unsigned long long)state_,
                  (unsigned long long)(inc_ >> 64), (unsigned long long)inc_);
    return std::string(buf);
}

void RngStream::restore_hex(const std::string& hex) {
    if (hex.size() != 64) throw DataError("RngStream: state hex must be 64 chars");
    auto part = [&](int i) {
        return (std::uint64_t)std::stoull(hex.substr(i * 16, 16), nullptr, 16);
    };
    state_ = ((u128)part(0) << 64) | part(1);
    inc_ = ((u128)part(2) << 64) | part(3);
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("normal_quantile: p must lie in (0,1)");
    const double q = p - 0.5;
    double r, num, den;
    if (std::abs(q) <= 0.425) {
        r = 0.180625 - q * q;
        num = (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                    6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                  1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
                1.3314166789178437745e2) * r + 3.3871328727963666080e0);
        den = (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                    3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
                  5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
                4.2313330701600911252e1) * r + 1.0);
        return q * num / den;
    }
    r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    if (r <= 5.0) {
        r -= 1.6;
        num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                    2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                  3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
                4.63033784615654529590e0) * r + 1.42343711074968357734e0);
        den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                    1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                  6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
                2.05319162663775882187e0) * r + 1.0);
    } else {
        r -= 5.0;
        num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                    1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                  2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
                5.46378491116411436990e0) * r + 6.65790464350110377720e0);
        den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                    1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                  1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
                5.99832206555887937690e-1) * r + 1.0);
    }
    double v = num / den;
    return q < 0.0 ? -v : v;
}

} // namespace lanp
