// Timing comparison of the parallel and serial system-assembly kernels, plus
// a correctness cross-check (the two must agree bit for bit).

#include <chrono>
#include <cstdio>

#include "mlpt/bem.hpp"

using namespace mlpt;

namespace {

LayeredShape test_shape(int layers) {
  LayeredShape s;
  double r = 1.0;
  for (int k = 0; k < layers; ++k) {
    s.curves.push_back(k % 2 == 0 ? SmoothCurve::ellipse(r, 0.8 * r)
                                  : SmoothCurve::circle(r));
    s.sigmas.push_back(k % 2 == 0 ? 3.0 : 0.5);
    r *= 0.6;
  }
  return s;
}

template <typename F>
double time_best_of(int reps, F&& f) {
  double best = 1e300;
  for (int i = 0; i < reps; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    f();
    auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
  }
  return best;
}

}  // namespace

int main() {
  std::printf("%-28s %10s %10s %8s %10s\n", "case", "serial[s]", "parallel[s]",
              "speedup", "max|diff|");
  for (int layers : {2, 3}) {
    for (int nodes : {128, 256, 512}) {
      LayeredShape shape = test_shape(layers);
      BlockNpSystem ser = assemble_serial(shape, nodes);
      BlockNpSystem par = assemble(shape, nodes);
      double diff = (ser.A - par.A).cwiseAbs().maxCoeff();
      double ts = time_best_of(3, [&] { assemble_serial(shape, nodes); });
      double tp = time_best_of(3, [&] { assemble(shape, nodes); });
      char label[64];
      std::snprintf(label, sizeof(label), "%d layers x %d nodes", layers, nodes);
      std::printf("%-28s %10.4f %10.4f %8.2f %10.3g\n", label, ts, tp, ts / tp,
                  diff);
    }
  }
  return 0;
}
