// Scans colluding cliques against a growing number of correct shared
// neighbors and prints where each strategy's fake stops being accepted.

#include <cstdio>

#include "snpd/scenario.hpp"

using namespace snpd;

namespace {

// Fraction of seeds where every colluder lands on the given verdict.
double fraction(StrategyKind kind, int group, int n_correct, Verdict want) {
  const int seeds = 200;
  int hits = 0;
  for (int i = 0; i < seeds; ++i) {
    Rng rng(seed_combine(0xdead, i));
    bool all = true;
    for (const Verdict v : run_collusion_scenario(kind, group, n_correct, rng))
      all = all && v == want;
    if (all) ++hits;
  }
  return hits / double(seeds);
}

}  // namespace

int main() {
  const struct {
    const char* name;
    StrategyKind kind;
  } strategies[] = {
      {"basic relay", StrategyKind::ColludingBasic},
      {"hyperbola locus", StrategyKind::ColludingHyperbola},
      {"reply disregard", StrategyKind::ReplyDisregard},
  };

  const int group = 3;
  std::printf("clique of %d colluders vs n correct shared neighbors\n", group);
  std::printf("cell: fraction of 200 seeds with all colluders faulty / "
              "all unverifiable / all verified\n\n");
  std::printf("%-16s", "");
  for (int n = 1; n <= 7; ++n) std::printf("      n=%d      ", n);
  std::printf("\n");

  for (const auto& s : strategies) {
    std::printf("%-16s", s.name);
    for (int n = 1; n <= 7; ++n) {
      std::printf(" %.2f/%.2f/%.2f",
                  fraction(s.kind, group, n, Verdict::Faulty),
                  fraction(s.kind, group, n, Verdict::Unverifiable),
                  fraction(s.kind, group, n, Verdict::Verified));
    }
    std::printf("\n");
  }

  std::printf("\nthe faulty column saturates one step later for each level of "
              "sophistication:\nbasic at n=%d, reply disregard at n=%d, "
              "hyperbola locus at n=%d.\n",
              group, group + 1, group + 2);
  return 0;
}
