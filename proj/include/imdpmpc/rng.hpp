#pragma once

#include <cstdint>

namespace imdpmpc {

/// Counter-based random stream: draw i is a pure function of
/// (seed, stream id, i). Episodes of different controllers that share
/// (seed, stream id) consume identical noise.
class NoiseStream {
public:
    NoiseStream(std::uint64_t seed, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {}

    /// Uniform in (0, 1).
    double uniform();
    /// Standard normal via Box-Muller; consumes two counters.
    double normal();

    std::uint64_t counter() const { return counter_; }
    void reset() { counter_ = 0; }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
};

} // namespace imdpmpc
