#ifndef VIRALSIM_RNG_HPP
#define VIRALSIM_RNG_HPP

#include <cstdint>
#include <initializer_list>
#include <random>

namespace viralsim {

using Seed = std::uint64_t;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
	x += 0x9e3779b97f4a7c15ULL;
	x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
	x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
	return x ^ (x >> 31);
}

/// Folds a list of integers into one well-mixed 64-bit value. Used to derive
/// independent sub-streams (placement, graph, source, protocol) from a base seed.
inline constexpr std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) noexcept {
	std::uint64_t h = 0x6a09e667f3bcc909ULL;
	for (auto p : parts) {
		h = splitmix64(h ^ splitmix64(p));
	}
	return h;
}

// The distributions in <random> are implementation-defined, so every draw
// that reaches an output goes through these helpers instead.

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(std::uint64_t bits) noexcept {
	return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

template <class Engine>
double uniform01(Engine& eng) {
	return uniform01(static_cast<std::uint64_t>(eng()));
}

/// Unbiased integer in [0, bound) by rejection on the 64-bit range.
template <class Engine>
std::uint64_t uniform_below(Engine& eng, std::uint64_t bound) {
	if (bound <= 1) {
		return 0;
	}
	const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
	std::uint64_t x = eng();
	while (x >= limit) {
		x = eng();
	}
	return x % bound;
}

/// Counter-based stream: the k-th draw depends only on (key, k), so the
/// result of a draw never depends on how many draws other consumers made.
class CounterStream {
public:
	using result_type = std::uint64_t;

	explicit CounterStream(std::uint64_t key) noexcept : key_(key) {}

	static constexpr result_type min() noexcept { return 0; }
	static constexpr result_type max() noexcept { return ~result_type{0}; }

	result_type operator()() noexcept { return splitmix64(key_ ^ splitmix64(counter_++)); }

private:
	std::uint64_t key_;
	std::uint64_t counter_ = 0;
};

using Engine = std::mt19937_64;

}  // namespace viralsim

#endif  // VIRALSIM_RNG_HPP
