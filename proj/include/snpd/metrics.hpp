#pragma once

#include <map>
#include <vector>

#include "snpd/verification.hpp"

namespace snpd {

// Outcome of one verifier round plus the ground truth needed to score it.
struct RoundResult {
  NodeId verifier = 0;
  Classification classification;
  std::map<NodeId, bool> adversary;  // responder -> behaved adversarially
  std::vector<NodeId> responders;
  ObservationSet observations;  // what the verifier assembled
};

// Aggregate rates with explicit denominators: false negatives are scored
// over adversary responders, false positives over correct responders.
struct Metrics {
  double false_negative_rate = 0;       // adversaries verified
  double false_positive_rate = 0;       // correct nodes tagged faulty
  double unverifiable_adversary_rate = 0;
  double unverifiable_correct_rate = 0;
  int adversary_responders = 0;
  int correct_responders = 0;
  int rounds = 0;
  double mean_degree = 0;      // filled by the scenario driver
  double degree_variance = 0;  // filled by the scenario driver
};

inline Metrics compute_metrics(const std::vector<RoundResult>& results) {
  Metrics m;
  m.rounds = static_cast<int>(results.size());
  int fn = 0, fp = 0, ua = 0, uc = 0;
  for (const auto& r : results) {
    for (const NodeId id : r.responders) {
      const Verdict v = r.classification.verdict_of(id);
      if (r.adversary.at(id)) {
        ++m.adversary_responders;
        if (v == Verdict::Verified) ++fn;
        if (v == Verdict::Unverifiable) ++ua;
      } else {
        ++m.correct_responders;
        if (v == Verdict::Faulty) ++fp;
        if (v == Verdict::Unverifiable) ++uc;
      }
    }
  }
  if (m.adversary_responders > 0) {
    m.false_negative_rate = double(fn) / m.adversary_responders;
    m.unverifiable_adversary_rate = double(ua) / m.adversary_responders;
  }
  if (m.correct_responders > 0) {
    m.false_positive_rate = double(fp) / m.correct_responders;
    m.unverifiable_correct_rate = double(uc) / m.correct_responders;
  }
  return m;
}

}  // namespace snpd
