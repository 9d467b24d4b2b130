// Times the OpenMP kernels against their serial reference versions and checks
// that both produce the same numbers.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>

#include <omp.h>

#include "nppc/fitting.hpp"
#include "nppc/reference.hpp"
#include "nppc/reliability.hpp"

using namespace nppc;

namespace {

double seconds(const std::function<void()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void report(const char* name, double serial, double parallel, int workers, bool same) {
  std::printf("%-22s reference %8.3f s   parallel(%d) %8.3f s   speedup %5.2fx   %s\n", name, serial, workers,
              parallel, serial / parallel, same ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  const int workers = argc > 1 ? std::atoi(argv[1]) : omp_get_num_procs();
  const Scale scale;
  const auto decoders = DecoderSpec::all();
  bool ok = true;

  {
    const CognitionVector xi{100, 1, 1, 5, 3};
    std::vector<std::vector<double>> a, b;
    const double ts = seconds([&] { a = reference::sample_feedback(xi, decoders, scale, 20000, 7); });
    const double tp = seconds([&] { b = sample_feedback_multi(xi, decoders, scale, 20000, 7, workers); });
    report("sample_feedback", ts, tp, workers, a == b);
    ok &= a == b;
  }
  {
    GridSpec spec;
    spec.n = {5, 120, 3};
    spec.g = {1, 50, 3};
    spec.w = {0.3, 1.5, 3};
    spec.o = {1, 10, 3};
    spec.s = {1, 5, 3};
    SamplingBudget budget;
    budget.jsd_samples = 2000;
    CandidateTable a, b;
    const double ts =
        seconds([&] { a = reference::build_candidate_table(spec, Objective::JSD, budget, scale, 3); });
    const double tp =
        seconds([&] { b = CandidateTable::build(spec, Objective::JSD, budget, scale, 3, workers); });
    report("candidate_table", ts, tp, workers, a == b);
    ok &= a == b;

    const auto observed = EmpiricalFeedback::from_ratings({2, 3, 3, 4, 3});
    std::vector<double> sa, sb;
    const double ss = seconds([&] {
      for (int r = 0; r < 50; ++r) sa = a.score_all(observed, 1);
    });
    const double sp = seconds([&] {
      for (int r = 0; r < 50; ++r) sb = a.score_all(observed, workers);
    });
    report("score_all x50 (1 wkr)", ss, sp, workers, sa == sb);
    ok &= sa == sb;
  }
  {
    const std::vector<double> s_axis{1, 2, 3, 4, 5};
    const auto g_axis = default_g_axis();
    std::vector<ReliabilitySurface> a, b;
    const CognitionVector base = default_reliability_base();
    const double ts =
        seconds([&] { a = reference::reliability_sweep(base, decoders, s_axis, g_axis, 1000, scale, 5); });
    const double tp =
        seconds([&] { b = reliability_sweep(base, decoders, s_axis, g_axis, 1000, scale, 5, workers); });
    bool same = a.size() == b.size();
    for (std::size_t d = 0; same && d < a.size(); ++d) same = a[d].values == b[d].values;
    report("reliability_sweep", ts, tp, workers, same);
    ok &= same;
  }
  return ok ? 0 : 1;
}
