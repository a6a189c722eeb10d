#ifndef HJBQVI_PARALLEL_HPP
#define HJBQVI_PARALLEL_HPP

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace hjbqvi {

/// Worker count: HJBQVI_THREADS caps it when set, otherwise hardware
/// concurrency (at least 1).
inline std::size_t default_thread_count() {
	std::size_t hw = std::thread::hardware_concurrency();
	if(hw == 0) hw = 1;
	if(const char *env = std::getenv("HJBQVI_THREADS")) {
		const long v = std::strtol(env, nullptr, 10);
		if(v > 0) hw = std::min<std::size_t>(hw, static_cast<std::size_t>(v));
	}
	return hw;
}

/// Chunked parallel loop over [0, n).  fn(begin, end) must only write to
/// disjoint per-index state, so results are identical for any worker count.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn &&fn) {
	if(threads <= 1 || n < 2048) {
		fn(std::size_t{0}, n);
		return;
	}
	threads = std::min(threads, (n + 2047) / 2048);
	const std::size_t chunk = (n + threads - 1) / threads;
	std::vector<std::thread> pool;
	pool.reserve(threads);
	for(std::size_t t = 0; t < threads; ++t) {
		const std::size_t begin = t * chunk;
		const std::size_t end = std::min(n, begin + chunk);
		if(begin >= end) break;
		pool.emplace_back([&fn, begin, end] { fn(begin, end); });
	}
	for(auto &th : pool) th.join();
}

} // namespace hjbqvi

#endif
