#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "lanp/tensor.hpp"

namespace lanp {

// PCG64 (XSL-RR 128/64, O'Neill 2014). One generator = one (seed, stream)
// pair; the stream id selects the LCG increment so distinct streams walk
// unrelated sequences. Normal variates use the AS241 inverse normal CDF
// (Wichura 1988), one uniform per normal, so the draw count per call is
// fixed and sequences replay bit-exactly from (seed, stream).
class RngStream {
public:
    explicit RngStream(std::uint64_t seed = 0, std::uint64_t stream = 0);

    std::uint64_t next_u64();

    // uniform on [0, 1) with 53-bit resolution
    double uniform01();
    // uniform on (0, 1), safe as inverse-CDF input
    double uniform_open01();
    double uniform(double lo, double hi);
    // uniform integer in [0, n), unbiased via rejection
    std::uint64_t uniform_int(std::uint64_t n);
    double normal();
    double normal(double mean, double sd) { return mean + sd * normal(); }
    Tensor normal_row(std::size_t n);

    // sample k distinct indices from [0, n) (order of selection preserved)
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

    // Deterministic child stream: same seed, stream id mixed with the tag.
    // Children of children form a stable tree keyed by the tag path.
    RngStream substream(std::uint64_t tag) const;

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

    // 64 hex chars: state then increment, for checkpointing
    std::string state_hex() const;
    void restore_hex(const std::string& hex);

    bool operator==(const RngStream& o) const {
        return state_ == o.state_ && inc_ == o.inc_;
    }

private:
    using u128 = unsigned __int128;
    void advance();

    u128 state_ = 0;
    u128 inc_ = 0;
    std::uint64_t seed_ = 0;
    std::uint64_t stream_ = 0;
};

// AS241 PPND16: quantile of the standard normal, |error| < 1e-15 on (0,1)
double normal_quantile(double p);

} // namespace lanp
