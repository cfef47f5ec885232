// Batch front-end: scenario sweeps, fixture dumps, and trace generation.

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "snpd/scenario.hpp"
#include "snpd/sim.hpp"
#include "snpd/trace.hpp"
#include "snpd/wire.hpp"

using json = nlohmann::json;
using namespace snpd;

namespace {

constexpr std::uint64_t kTraceSeedTag = 0x74726163;  // trace synthesis stream

// ---- name tables ----------------------------------------------------------

StrategyKind strategy_from(const std::string& name) {
  if (name == "honest") return StrategyKind::Honest;
  if (name == "unknowledgeable-liar") return StrategyKind::UnknowledgeableLiar;
  if (name == "knowledgeable-independent")
    return StrategyKind::KnowledgeableIndependent;
  if (name == "collinear-exploit") return StrategyKind::CollinearExploit;
  if (name == "colluding-basic") return StrategyKind::ColludingBasic;
  if (name == "colluding-hyperbola") return StrategyKind::ColludingHyperbola;
  if (name == "reply-disregard") return StrategyKind::ReplyDisregard;
  throw std::runtime_error("unknown adversary strategy: " + name);
}

std::string strategy_name(StrategyKind k) {
  switch (k) {
    case StrategyKind::Honest: return "honest";
    case StrategyKind::UnknowledgeableLiar: return "unknowledgeable-liar";
    case StrategyKind::KnowledgeableIndependent:
      return "knowledgeable-independent";
    case StrategyKind::CollinearExploit: return "collinear-exploit";
    case StrategyKind::ColludingBasic: return "colluding-basic";
    case StrategyKind::ColludingHyperbola: return "colluding-hyperbola";
    case StrategyKind::ReplyDisregard: return "reply-disregard";
  }
  return "honest";
}

MobilityModel model_from(const std::string& name) {
  if (name == "grid-roads") return MobilityModel::GridRoads;
  if (name == "random-waypoint") return MobilityModel::RandomWaypoint;
  if (name == "static") return MobilityModel::Static;
  throw std::runtime_error("unknown mobility model: " + name);
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Verified: return "verified";
    case Verdict::Unverifiable: return "unverifiable";
    case Verdict::Faulty: return "faulty";
  }
  return "unverifiable";
}

// ---- config ---------------------------------------------------------------

struct SweepAxis {
  std::string parameter;
  std::vector<double> values;
};

struct RunConfig {
  std::optional<std::string> trace_file;
  std::optional<SynthConfig> synthetic;
  ScenarioConfig scenario;
  std::vector<SweepAxis> sweep;
};

SynthConfig parse_synth(const json& j) {
  SynthConfig s;
  s.model = model_from(j.value("model", "grid-roads"));
  s.area_width = j.value("area_width", s.area_width);
  s.area_height = j.value("area_height", s.area_height);
  s.node_count = j.value("node_count", s.node_count);
  s.snapshot_count = j.value("snapshot_count", s.snapshot_count);
  s.step_seconds = j.value("step_seconds", s.step_seconds);
  s.speed_min = j.value("speed_min", s.speed_min);
  s.speed_max = j.value("speed_max", s.speed_max);
  s.road_spacing = j.value("road_spacing", s.road_spacing);
  if (!s.valid()) throw std::runtime_error("invalid synthetic trace config");
  return s;
}

RunConfig parse_config(const json& j) {
  RunConfig rc;
  if (j.contains("trace_file")) rc.trace_file = j.at("trace_file").get<std::string>();
  if (j.contains("synthetic")) rc.synthetic = parse_synth(j.at("synthetic"));
  if (rc.trace_file.has_value() == rc.synthetic.has_value())
    throw std::runtime_error(
        "config needs exactly one of `trace_file` and `synthetic`");

  ScenarioConfig& sc = rc.scenario;
  sc.seed = j.value("seed", std::uint64_t{1});
  if (j.contains("params")) {
    const json& p = j.at("params");
    sc.params.range = p.value("range", sc.params.range);
    sc.params.eps_p = p.value("eps_p", sc.params.eps_p);
    sc.params.eps_r = p.value("eps_r", sc.params.eps_r);
    sc.params.t_max = p.value("t_max", sc.params.t_max);
    sc.params.reveal_guard = p.value("reveal_guard", sc.params.reveal_guard);
    sc.params.jitter_max = p.value("jitter_max", sc.params.jitter_max);
    if (p.contains("delta")) {
      const auto d = p.at("delta");
      sc.params.delta = {d.at(0).get<int>(), d.at(1).get<int>()};
    }
  }
  if (j.contains("adversary")) {
    const json& a = j.at("adversary");
    sc.adversary_kind = strategy_from(a.value("strategy", std::string("honest")));
    sc.adversary_ratio = a.value("ratio", 0.0);
    sc.group_size = a.value("sigma", sc.group_size);
  }
  sc.verifier_ratio = j.value("verifier_ratio", sc.verifier_ratio);
  sc.loss_probability = j.value("loss_probability", sc.loss_probability);
  if (!sc.valid()) throw std::runtime_error("invalid scenario parameters");

  if (j.contains("sweep")) {
    for (const json& axis : j.at("sweep")) {
      SweepAxis sa;
      sa.parameter = axis.at("parameter").get<std::string>();
      for (const json& v : axis.at("values")) sa.values.push_back(v.get<double>());
      if (sa.values.empty())
        throw std::runtime_error("sweep axis with no values: " + sa.parameter);
      rc.sweep.push_back(std::move(sa));
    }
  }
  return rc;
}

void apply_parameter(ScenarioConfig& sc, const std::string& name, double v) {
  if (name == "adversary.ratio") sc.adversary_ratio = v;
  else if (name == "adversary.sigma") sc.group_size = static_cast<int>(v);
  else if (name == "verifier_ratio") sc.verifier_ratio = v;
  else if (name == "loss_probability") sc.loss_probability = v;
  else if (name == "params.range") sc.params.range = v;
  else if (name == "params.eps_p") sc.params.eps_p = v;
  else if (name == "params.eps_r") sc.params.eps_r = v;
  else throw std::runtime_error("unknown sweep parameter: " + name);
}

// ---- run ------------------------------------------------------------------

struct Point {
  ScenarioConfig scenario;
  std::vector<double> axis_values;  // parallel to RunConfig::sweep
  Metrics metrics;
};

std::string csv_row(std::size_t index, const RunConfig& rc, const Point& pt,
                    std::size_t nodes, std::size_t snapshots) {
  const ScenarioConfig& sc = pt.scenario;
  const Metrics& m = pt.metrics;
  char buf[512];
  std::snprintf(
      buf, sizeof buf,
      "%zu,%llu,%s,%.6f,%d,%.6f,%.3f,%.6f,%.3f,%.3f,%zu,%zu,"
      "%d,%d,%d,%.6f,%.6f,%.6f,%.6f,%.4f,%.4f\n",
      index, static_cast<unsigned long long>(sc.seed),
      strategy_name(rc.scenario.adversary_kind).c_str(), sc.adversary_ratio,
      sc.group_size, sc.verifier_ratio, sc.params.range, sc.loss_probability,
      sc.params.eps_p, sc.params.eps_r, nodes, snapshots, m.rounds,
      m.adversary_responders, m.correct_responders, m.false_negative_rate,
      m.false_positive_rate, m.unverifiable_adversary_rate,
      m.unverifiable_correct_rate, m.mean_degree, m.degree_variance);
  return buf;
}

constexpr const char* kCsvHeader =
    "point,seed,strategy,adversary_ratio,sigma,verifier_ratio,range_m,"
    "loss_probability,eps_p,eps_r,nodes,snapshots,rounds,"
    "adversary_responders,correct_responders,fn_rate,fp_rate,"
    "unverifiable_adversary_rate,unverifiable_correct_rate,mean_degree,"
    "degree_variance\n";

int cmd_run(const std::string& config_path, const std::string& out_dir,
            int jobs, std::optional<std::uint64_t> seed_override) {
  std::ifstream cfg_in(config_path);
  if (!cfg_in) throw std::runtime_error("cannot open config: " + config_path);
  const json cfg_json =
      json::parse(cfg_in, nullptr, /*allow_exceptions=*/true,
                  /*ignore_comments=*/true);
  RunConfig rc = parse_config(cfg_json);
  if (seed_override) rc.scenario.seed = *seed_override;

  MobilityTrace trace;
  if (rc.trace_file) {
    trace = load_trace_file(*rc.trace_file);
  } else {
    Rng trng(seed_combine(rc.scenario.seed, kTraceSeedTag));
    trace = synth_trace(*rc.synthetic, trng);
  }

  // Cross product of the sweep axes in declaration order; an empty sweep is
  // a single point.
  std::size_t n_points = 1;
  for (const SweepAxis& a : rc.sweep) n_points *= a.values.size();
  std::vector<Point> points(n_points);
  for (std::size_t p = 0; p < n_points; ++p) {
    Point& pt = points[p];
    pt.scenario = rc.scenario;
    std::size_t rest = p;
    for (std::size_t ax = rc.sweep.size(); ax-- > 0;) {
      const SweepAxis& a = rc.sweep[ax];
      const double v = a.values[rest % a.values.size()];
      rest /= a.values.size();
      apply_parameter(pt.scenario, a.parameter, v);
      pt.axis_values.insert(pt.axis_values.begin(), v);
    }
    pt.scenario.seed = seed_combine(rc.scenario.seed, p);
    if (!pt.scenario.valid())
      throw std::runtime_error("sweep point " + std::to_string(p) +
                               " leaves an invalid config");
  }

  // Worker pool; the collector below writes strictly in point order.
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (;;) {
      const std::size_t p = next.fetch_add(1);
      if (p >= n_points) return;
      points[p].metrics = run_scenario(trace, points[p].scenario);
    }
  };
  const int pool = std::max(1, jobs);
  if (pool == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int t = 0; t < pool; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  std::filesystem::create_directories(out_dir);
  const std::size_t nodes = trace.node_count();
  const std::size_t snapshots = trace.snapshots.size();

  {
    std::ofstream csv(out_dir + "/results.csv");
    csv << kCsvHeader;
    for (std::size_t p = 0; p < n_points; ++p)
      csv << csv_row(p, rc, points[p], nodes, snapshots);
  }

  {
    json summary;
    summary["config"] = cfg_json;
    summary["trace"] = {{"nodes", nodes}, {"snapshots", snapshots}};
    summary["points"] = json::array();
    for (std::size_t p = 0; p < n_points; ++p) {
      const Point& pt = points[p];
      json jp;
      jp["point"] = p;
      jp["seed"] = pt.scenario.seed;
      for (std::size_t ax = 0; ax < rc.sweep.size(); ++ax)
        jp["axes"][rc.sweep[ax].parameter] = pt.axis_values[ax];
      jp["metrics"] = {
          {"fn_rate", pt.metrics.false_negative_rate},
          {"fp_rate", pt.metrics.false_positive_rate},
          {"unverifiable_adversary_rate",
           pt.metrics.unverifiable_adversary_rate},
          {"unverifiable_correct_rate", pt.metrics.unverifiable_correct_rate},
          {"adversary_responders", pt.metrics.adversary_responders},
          {"correct_responders", pt.metrics.correct_responders},
          {"rounds", pt.metrics.rounds},
          {"mean_degree", pt.metrics.mean_degree},
          {"degree_variance", pt.metrics.degree_variance},
      };
      summary["points"].push_back(std::move(jp));
    }
    std::ofstream js(out_dir + "/summary.json");
    js << summary.dump(2) << "\n";
  }

  {
    std::ofstream rep(out_dir + "/report.txt");
    rep << "neighbor position discovery run\n";
    rep << "config: " << config_path << "\n";
    rep << "trace: " << nodes << " nodes, " << snapshots << " snapshots\n";
    rep << "strategy: " << strategy_name(rc.scenario.adversary_kind)
        << ", base seed " << rc.scenario.seed << "\n\n";
    char line[256];
    for (std::size_t p = 0; p < n_points; ++p) {
      const Point& pt = points[p];
      rep << "point " << p;
      for (std::size_t ax = 0; ax < rc.sweep.size(); ++ax) {
        std::snprintf(line, sizeof line, " %s=%g",
                      rc.sweep[ax].parameter.c_str(), pt.axis_values[ax]);
        rep << line;
      }
      std::snprintf(line, sizeof line,
                    ": fn=%.4f fp=%.4f unverifiable(adv)=%.4f "
                    "unverifiable(corr)=%.4f over %d adversary / %d correct "
                    "responders in %d rounds\n",
                    pt.metrics.false_negative_rate,
                    pt.metrics.false_positive_rate,
                    pt.metrics.unverifiable_adversary_rate,
                    pt.metrics.unverifiable_correct_rate,
                    pt.metrics.adversary_responders,
                    pt.metrics.correct_responders, pt.metrics.rounds);
      rep << line;
    }
  }

  std::cout << "wrote " << n_points << " sweep point(s) to " << out_dir
            << "\n";
  return 0;
}

// ---- fixtures ---------------------------------------------------------------

std::string hex(std::span<const std::uint8_t> data) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  for (const auto b : data) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0xf]);
  }
  return out;
}

int cmd_fixtures(const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);

  {
    // Deterministic wire fixtures, shared with the unit tests.
    WireAuth auth;
    Rng rng(20240801);
    const KeyPair verifier = auth.make_key(rng);
    KeyPair nodes[5];
    for (auto& n : nodes) n = auth.make_key(rng);
    const KeyPair session = auth.make_key(rng);

    const Poll poll{0x11223344u, session.pub};

    wire::WireReply reply;
    reply.link = 0x55667788u;
    reply.session_key_hash = auth.hash(session.pub);
    reply.commitment = wire::seal_commitment(auth, nodes[0].secret,
                                             nodes[0].pub, session.pub,
                                             1.2345e-3);

    Reveal reveal;
    reveal.link = 0x99aabbccu;
    reveal.ownership =
        auth.ownership_proof(session.secret, auth.hash(verifier.pub));
    reveal.verifier_key = verifier.pub;
    reveal.sig = auth.sign(
        verifier.secret,
        detail::reveal_sign_payload(reveal.ownership, reveal.verifier_key,
                                    reveal.link));

    wire::WireReportBody body;
    body.claimed_position = {1234.5, -678.25};
    body.reply_tx_s = 2.5e-3;
    for (int i = 0; i < 5; ++i) {
      wire::WireReportEntry e;
      e.rx_s = 3.0e-3 + i * 1.0e-4;
      e.commitment = wire::seal_commitment(auth, nodes[i].secret, nodes[i].pub,
                                           session.pub, 1.0e-3 + i * 2.0e-5);
      body.entries.push_back(e);
    }
    const wire::WireReport report = wire::seal_report(
        auth, nodes[0].secret, verifier.pub, 0xdeadbeefu, 0x99aabbccu, body);

    std::ofstream out(out_dir + "/wire_messages.hex");
    const Bytes poll_b = wire::encode_poll(poll);
    const Bytes reply_b = wire::encode_reply(reply);
    const Bytes reveal_b = *wire::encode_reveal(reveal);
    const Bytes report_b = wire::encode_report(report);
    out << "poll " << poll_b.size() << " " << hex(poll_b) << "\n";
    out << "reply " << reply_b.size() << " " << hex(reply_b) << "\n";
    out << "reveal " << reveal_b.size() << " " << hex(reveal_b) << "\n";
    out << "report(5) " << report_b.size() << " " << hex(report_b) << "\n";
  }

  for (const Fixture& fx : all_fixtures()) {
    const Classification cls = classify(fx.obs, fx.thresholds);
    std::ofstream out(out_dir + "/scenario_" + fx.name + ".txt");
    out << fx.name << "\nverifier " << fx.obs.verifier << " at ("
        << fx.obs.verifier_position.x << ", " << fx.obs.verifier_position.y
        << ")\n\n";
    char line[256];
    for (const auto& [id, o] : cls.nodes) {
      const auto* r = fx.obs.find(id);
      const Position truth = fx.truths.at(id);
      std::snprintf(line, sizeof line,
                    "node %u: true (%.2f, %.2f) claimed (%.2f, %.2f) -> %s "
                    "links=%d mismatches=%d%s\n",
                    id, truth.x, truth.y, r->claimed_position.x,
                    r->claimed_position.y, verdict_name(o.verdict), o.links,
                    o.mismatches, o.ml_demoted ? " (demoted)" : "");
      out << line;
    }
    bool all_match = true;
    for (const auto& e : fx.expected) {
      const auto& o = cls.nodes.at(e.id);
      all_match = all_match && o.verdict == e.verdict && o.links == e.links &&
                  o.mismatches == e.mismatches;
    }
    out << "\nexpected verdicts " << (all_match ? "match" : "DIFFER") << "\n";
  }

  std::cout << "wrote fixtures to " << out_dir << "\n";
  return 0;
}

// ---- trace-gen --------------------------------------------------------------

int cmd_trace_gen(const std::string& spec_path, const std::string& out_file) {
  std::ifstream in(spec_path);
  if (!in) throw std::runtime_error("cannot open spec: " + spec_path);
  const json j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  const SynthConfig cfg = parse_synth(j);
  Rng rng(j.value("seed", std::uint64_t{1}));
  const MobilityTrace trace = synth_trace(cfg, rng);
  write_trace_file(out_file, trace);
  std::cout << "wrote " << trace.snapshots.size() << " snapshots of "
            << trace.node_count() << " nodes to " << out_file << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"secure neighbor position discovery batch tool"};
  app.require_subcommand(1);

  std::string config_path, out_dir, spec_path, out_file;
  int jobs = 1;
  std::optional<std::uint64_t> seed_override;

  CLI::App* run = app.add_subcommand("run", "run a scenario sweep");
  run->add_option("--config", config_path, "scenario config (json, // comments ok)")
      ->required();
  run->add_option("--out", out_dir, "output directory")->required();
  run->add_option("--jobs", jobs, "worker threads");
  run->add_option("--seed", seed_override, "override the config seed");

  CLI::App* fixtures =
      app.add_subcommand("fixtures", "write golden wire and scenario fixtures");
  fixtures->add_option("--out", out_dir, "output directory")->required();

  CLI::App* trace_gen =
      app.add_subcommand("trace-gen", "generate a synthetic mobility trace");
  trace_gen->add_option("--spec", spec_path, "synthetic trace spec (json)")
      ->required();
  trace_gen->add_option("--out", out_file, "output trace file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, out_dir, jobs, seed_override);
    if (fixtures->parsed()) return cmd_fixtures(out_dir);
    if (trace_gen->parsed()) return cmd_trace_gen(spec_path, out_file);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
