#include "gbmflow/rng.hpp"

namespace gbmflow {

Xoshiro256::Xoshiro256(const RngSpec& spec) noexcept {
    // Distinct (seed, index) pairs land on unrelated SplitMix64 sequences.
    std::uint64_t x = mix64(spec.master_seed) ^ mix64(spec.stream_index + 0x9e3779b97f4a7c15ULL);
    for (auto& word : s_) {
        x += 0x9e3779b97f4a7c15ULL;
        word = mix64(x);
    }
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
}

}  // namespace gbmflow
