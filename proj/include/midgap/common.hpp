#pragma once
#include <cstdint>
#include <stdexcept>
#include <string>

namespace midgap {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : Error { using Error::Error; };
struct DomainError : Error { using Error::Error; };
struct RangeError : Error { using Error::Error; };
struct SpecError : Error { using Error::Error; };
struct SplitError : Error { using Error::Error; };
struct InputError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct FormatError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct DataError : Error { using Error::Error; };
struct OptimizerError : Error { using Error::Error; };

struct TrainingDiverged : Error {
    long iteration;
    explicit TrainingDiverged(long iter)
        : Error("training diverged (non-finite loss) at iteration " + std::to_string(iter)),
          iteration(iter) {}
};

// splitmix64; used to derive independent per-item seeds from (seed, index)
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace midgap
