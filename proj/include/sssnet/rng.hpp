#pragma once

// Portable random stream. The engine is std::mt19937_64, whose output sequence
// is fixed by the standard; the conversions to doubles and bounded integers are
// implemented here because the <random> distributions are implementation-defined.

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace sssnet {

/// SplitMix64 finalizer, used to derive independent seeds from (seed, index) pairs.
constexpr std::uint64_t mix64(std::uint64_t z) {
	z += 0x9e3779b97f4a7c15ULL;
	z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
	z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
	return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
	return mix64(mix64(seed) ^ (index * 0xd1b54a32d192ed03ULL + 0x8cb92ba72f3d8dd7ULL));
}

template <typename... Rest>
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index, Rest... rest) {
	return derive_seed(derive_seed(seed, index), static_cast<std::uint64_t>(rest)...);
}

class Rng {
  public:
	explicit Rng(std::uint64_t seed = 0) : m_engine(mix64(seed)) {}

	std::uint64_t next() { return m_engine(); }

	/// Uniform double in [0, 1) with 53 random bits.
	double uniform() { return static_cast<double>(m_engine() >> 11) * 0x1.0p-53; }

	double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

	/// Uniform integer in [0, bound), bound > 0. Rejection sampling keeps it unbiased.
	std::uint64_t below(std::uint64_t bound) {
		const std::uint64_t limit = -bound % bound; // 2^64 mod bound
		for (;;) {
			const std::uint64_t x = m_engine();
			if (x >= limit) return x % bound;
		}
	}

	bool bernoulli(double p) { return uniform() < p; }

	template <typename T>
	void shuffle(std::span<T> items) {
		for (std::size_t i = items.size(); i > 1; --i) {
			const auto j = static_cast<std::size_t>(below(i));
			using std::swap;
			swap(items[i - 1], items[j]);
		}
	}

	/// Child stream for a sub-task; does not disturb the parent sequence beyond one draw.
	Rng split() { return Rng(m_engine()); }

  private:
	std::mt19937_64 m_engine;
};

} // namespace sssnet
