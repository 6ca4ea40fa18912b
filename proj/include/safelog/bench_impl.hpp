#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>

namespace safelog {

template <typename Make>
std::vector<ExperimentRow> run_seeded(std::uint64_t first_seed, int n_runs, const SuiteOptions& opts, Make make) {
  if (n_runs < 1) throw ValidationError("run_seeded: need at least one run");
  std::vector<std::vector<ExperimentRow>> per_seed(static_cast<std::size_t>(n_runs));
  std::vector<std::exception_ptr> errors(per_seed.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < per_seed.size(); i = next++) {
      try {
        const std::uint64_t seed = first_seed + i;
        Rng rng(seed);
        const DesignProblem prob = make(seed, rng);
        per_seed[i] = evaluate_methods(prob, seed, opts);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  unsigned threads = opts.threads ? opts.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(per_seed.size()));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<ExperimentRow> rows;
  for (auto& v : per_seed) rows.insert(rows.end(), v.begin(), v.end());
  return rows;
}

}  // namespace safelog
