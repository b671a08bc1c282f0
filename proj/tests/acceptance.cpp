// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "gvc/gvc.hpp"
#include "oracles.hpp"

namespace {

using Clock = std::chrono::steady_clock;
using gvc::Matrix;

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  fmt::print("[{}] criterion {:>2} {}: {}\n", ok ? "PASS" : "FAIL", id, name, detail);
  if (!ok) ++failures;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string slurp(const gvc::fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

gvc::fs::path scratch_dir(const std::string& name) {
  auto p = gvc::fs::temp_directory_path() / fmt::format("gvc_acceptance_{}_{}", ::getpid(), name);
  gvc::fs::remove_all(p);
  gvc::fs::create_directories(p);
  return p;
}

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = u(rng);
  return m;
}

// Default parameters, synthetic Medium band, 20 repetitions, FBR at level 1.
void controller_ordering() {
  const auto t0 = Clock::now();
  gvc::ExperimentConfig cfg;
  cfg.trace.band = gvc::BandName::Medium;
  cfg.repetitions = 20;
  cfg.controllers = {{gvc::ControllerKind::Proposed, 1, {}}, {gvc::ControllerKind::BB, 1, {}},
                     {gvc::ControllerKind::FBR, 1, {}}};
  const auto dir = scratch_dir("ordering");
  const auto res = gvc::cmd_compare(cfg, dir);
  const double elapsed = seconds_since(t0);
  gvc::fs::remove_all(dir);
  const auto& p = res.rows[0];
  const auto& b = res.rows[1];
  const auto& f = res.rows[2];
  const bool avq_ok = p.avq > b.avq && b.avq > f.avq;
  const bool rr_p_b = p.rr_percent < b.rr_percent;
  const bool rr_b_f = b.rr_percent < f.rr_percent;
  const bool ok = avq_ok && rr_p_b && rr_b_f && elapsed < 10.0 && res.exit_code == gvc::ExitCode::Ok;
  report(1, "controller ordering", ok,
         fmt::format("AVQ proposed={:.4f} bb={:.4f} fbr1={:.4f} ({}); RR proposed={:.4f} bb={:.4f} fbr1={:.4f} "
                     "(proposed<bb {}, bb<fbr1 {}); {:.2f} s",
                     p.avq, b.avq, f.avq, avq_ok ? "ordered" : "NOT ordered", p.rr_percent, b.rr_percent,
                     f.rr_percent, rr_p_b ? "yes" : "NO", rr_b_f ? "yes" : "NO", elapsed));
}

void band_monotonicity() {
  const auto t0 = Clock::now();
  gvc::ExperimentConfig cfg;
  cfg.repetitions = 20;
  cfg.bands = {gvc::BandName::Low, gvc::BandName::Medium, gvc::BandName::High};
  const auto dir = scratch_dir("sweep");
  const auto res = gvc::cmd_sweep(cfg, dir);
  const double elapsed = seconds_since(t0);
  gvc::fs::remove_all(dir);
  const auto& r = res.rows;
  const bool avq_ok = r[0].avq < r[1].avq && r[1].avq < r[2].avq;
  const bool rr_ok = r[0].rr_percent > r[1].rr_percent && r[1].rr_percent > r[2].rr_percent;
  report(2, "band monotonicity", avq_ok && rr_ok && elapsed < 10.0 && res.exit_code == gvc::ExitCode::Ok,
         fmt::format("AVQ low={:.4f} medium={:.4f} high={:.4f}; RR low={:.4f} medium={:.4f} high={:.4f}; {:.2f} s",
                     r[0].avq, r[1].avq, r[2].avq, r[0].rr_percent, r[1].rr_percent, r[2].rr_percent, elapsed));
}

void selector_oracle() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double gammas[] = {0.5, 1.0, 2.0};
  const double buffer_max = 4.0;
  int mismatches = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const int n = 1 + static_cast<int>(u(rng) * 10);
    std::vector<double> q, d;
    std::vector<gvc::QualityLevel> levels;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      acc += 0.01 + u(rng) * 2.0;
      q.push_back(acc);
      d.push_back(0.01 + u(rng) * 2.0);
      levels.push_back({i + 1, q.back(), d.back(), 1.0});
    }
    const double b = gvc::kBufferFloor + u(rng) * (buffer_max - gvc::kBufferFloor);
    const double lambda = u(rng) * 10.0;
    const double gamma = gammas[static_cast<int>(u(rng) * 3)];
    if (gvc::select_quality(levels, b, lambda, gamma) !=
        oracle::argmax_utility(q, d, b, lambda, gamma, gvc::kBufferFloor)) {
      ++mismatches;
    }
  }
  report(3, "selector oracle", mismatches == 0, fmt::format("{} mismatches in 10000 instances", mismatches));
}

gvc::SessionConfig random_session(std::mt19937_64& rng, int i) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  gvc::SessionConfig cfg;
  const int n = 1 + static_cast<int>(u(rng) * 8);
  cfg.levels.clear();
  double q = 0.0;
  for (int l = 1; l <= n; ++l) {
    q += 0.1 + u(rng);
    cfg.levels.push_back({l, q, 0.02 + u(rng) * 2.0, 0.1 + u(rng) * 5.0});
  }
  cfg.params.gamma = 0.25 + u(rng) * 2.0;
  cfg.params.beta = 0.001 + u(rng) * 0.5;
  cfg.params.lambda_init = u(rng) * 5.0;
  cfg.params.buffer_max = 0.5 + u(rng) * 8.0;
  cfg.params.chunk_duration = 0.25 + u(rng) * 1.5;
  cfg.controller.kind = static_cast<gvc::ControllerKind>(i % 3);
  cfg.controller.fixed_level = 1 + static_cast<int>(u(rng) * n);
  cfg.controller.bb = {u(rng) * cfg.params.buffer_max * 0.5, 0.05 + u(rng) * cfg.params.buffer_max * 0.45};
  cfg.num_chunks = 1 + static_cast<int>(u(rng) * 150);
  const double duration = cfg.num_chunks * cfg.params.chunk_duration * 4.0 + 10.0;
  cfg.trace = gvc::synth_trace(gvc::kBands[static_cast<std::size_t>(u(rng) * 3)].name, duration,
                               static_cast<std::uint64_t>(i), 0.2 + u(rng) * 2.0);
  cfg.seed = static_cast<std::uint64_t>(i);
  if (u(rng) < 0.3) cfg.predictive = gvc::PredictiveConfig{u(rng) * 2.0, u(rng)};
  return cfg;
}

void buffer_and_lambda_suites() {
  std::mt19937_64 rng(77);
  long records = 0;
  int buffer_violations = 0;
  int time_violations = 0;
  int proposed_sessions = 0;
  int lambda_violations = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto cfg = random_session(rng, i);
    const auto log = gvc::run_session(cfg);
    double stalls = 0.0;
    double prev_lambda = cfg.params.lambda_init;
    bool lambda_ok = true;
    for (const auto& r : log.records) {
      ++records;
      const bool ok = r.buffer >= 0.0 && r.buffer <= cfg.params.buffer_max && r.rebuffer >= 0.0 &&
                      (r.rebuffer == 0.0 || r.buffer == 0.0);
      if (!ok) ++buffer_violations;
      stalls += r.rebuffer;
      if (cfg.controller.kind == gvc::ControllerKind::Proposed) {
        if (r.lambda < prev_lambda || r.lambda < 0.0) lambda_ok = false;
        prev_lambda = r.lambda;
      }
    }
    const double expected = static_cast<double>(log.records.size()) * cfg.params.chunk_duration + stalls;
    if (log.wall_clock != expected) ++time_violations;
    if (cfg.controller.kind == gvc::ControllerKind::Proposed) {
      ++proposed_sessions;
      if (!lambda_ok) ++lambda_violations;
    }
  }
  report(4, "buffer invariants", buffer_violations == 0 && time_violations == 0,
         fmt::format("1000 sessions, {} records: {} buffer violations, {} time-conservation violations", records,
                     buffer_violations, time_violations));
  report(5, "lambda dynamics", lambda_violations == 0 && proposed_sessions > 0,
         fmt::format("{} sessions with the Lagrangian controller, {} with a decreasing or negative multiplier",
                     proposed_sessions, lambda_violations));
}

void attention_suite() {
  std::mt19937_64 rng(31337);
  double worst_row_sum = 0.0;
  double worst_convexity = 0.0;
  double worst_single = 0.0;
  double worst_uniform = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const int d = 1 + trial % 6;
    const int dk = 1 + trial % 4;
    const int dv = 1 + trial % 5;
    gvc::AttentionParams p{gvc::Modality::HM, gvc::Modality::EB, random_matrix(rng, d, dk, 2.0),
                           random_matrix(rng, d, dk, 2.0), random_matrix(rng, d, dv, 2.0)};
    const Matrix target = random_matrix(rng, 1 + trial % 7, d, 3.0);
    const Matrix source = random_matrix(rng, 1 + trial % 9, d, 3.0);

    const Matrix w = gvc::attention_weights(target, source, p);
    for (Eigen::Index i = 0; i < w.rows(); ++i) worst_row_sum = std::max(worst_row_sum, std::abs(w.row(i).sum() - 1.0));

    const Matrix v = source * p.w_v;
    const Matrix out = gvc::crossmodal_attention(target, source, p);
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      worst_convexity = std::max(worst_convexity, v.col(j).minCoeff() - out.col(j).minCoeff());
      worst_convexity = std::max(worst_convexity, out.col(j).maxCoeff() - v.col(j).maxCoeff());
    }

    const Matrix one = source.topRows(1);
    const Matrix single = gvc::crossmodal_attention(target, one, p);
    const Eigen::RowVectorXd v0 = one * p.w_v;
    for (Eigen::Index i = 0; i < single.rows(); ++i)
      worst_single = std::max(worst_single, (single.row(i) - v0).cwiseAbs().maxCoeff());

    auto flat = p;
    flat.w_q.setZero();
    const Matrix uniform = gvc::crossmodal_attention(target, source, flat);
    const Eigen::RowVectorXd mean = v.colwise().mean();
    for (Eigen::Index i = 0; i < uniform.rows(); ++i)
      worst_uniform = std::max(worst_uniform, (uniform.row(i) - mean).cwiseAbs().maxCoeff());
  }

  Matrix t(2, 1), s(2, 2), k(2, 1);
  t << 1, 2;
  s << 1, 0, 0, 1;
  k << 1, 0;
  Matrix q(1, 1);
  q << 1;
  const gvc::AttentionParams hand{gvc::Modality::VO, gvc::Modality::HM, q, k, Matrix::Identity(2, 2)};
  const Matrix h = gvc::crossmodal_attention(t, s, hand);
  const double expected[2][2] = {{0.7311, 0.2689}, {0.8808, 0.1192}};
  double worst_hand = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) worst_hand = std::max(worst_hand, std::abs(h(i, j) - expected[i][j]));

  const bool ok = worst_row_sum <= 1e-9 && worst_convexity <= 1e-12 && worst_single <= 1e-12 &&
                  worst_uniform <= 1e-12 && worst_hand <= 1e-4;
  report(6, "attention kernel", ok,
         fmt::format("row-sum err {:.2e} (<=1e-9), convexity excess {:.2e}, single-key err {:.2e}, uniform err "
                     "{:.2e} (<=1e-12), 2x2 err {:.2e} (<=1e-4)",
                     worst_row_sum, worst_convexity, worst_single, worst_uniform, worst_hand));
}

void metric_identities() {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int rmse_violations = 0;
  int zero_violations = 0;
  for (int i = 0; i < 1000; ++i) {
    const Matrix a = random_matrix(rng, 1 + i % 8, 1 + i % 5, 10.0);
    const Matrix b = random_matrix(rng, a.rows(), a.cols(), 10.0);
    if (gvc::rmse(a, b) < gvc::mae(a, b)) ++rmse_violations;
    if (gvc::mae(a, a) != 0.0 || gvc::rmse(a, a) != 0.0) ++zero_violations;
  }
  int bound_violations = 0;
  for (int i = 0; i < 300; ++i) {
    const auto cfg = random_session(rng, i);
    const auto log = gvc::run_session(cfg);
    if (log.records.empty()) continue;
    const double a = gvc::avq(log);
    const double r = gvc::rebuffer_ratio(log);
    const double n = static_cast<double>(cfg.levels.size());
    if (a < 1.0 || a > n || r < 0.0 || r > 100.0) ++bound_violations;
  }
  report(7, "metric identities", rmse_violations == 0 && zero_violations == 0 && bound_violations == 0,
         fmt::format("rmse<mae {}/1000, nonzero self-error {}/1000, AVQ/RR out of bounds {}/300", rmse_violations,
                     zero_violations, bound_violations));
}

int run_command(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void compare_determinism() {
  const auto dir = scratch_dir("determinism");
  {
    std::ofstream cfg(dir / "compare.yaml");
    cfg << "experiment: {repetitions: 20, seed: 7}\n"
           "trace: {source: synth, band: medium}\n"
           "controllers: [{type: proposed}, {type: bb}, {type: fbr, level: 1}]\n"
           "output: {log_level: quiet}\n";
  }
  int rc = 0;
  for (const char* run : {"a", "b"}) {
    rc |= run_command(fmt::format("\"{}\" compare --config \"{}\" --out \"{}\" --seed 7", GVCSIM_PATH,
                                  (dir / "compare.yaml").string(), (dir / run).string()));
  }
  const auto a = slurp(dir / "a" / "summary.csv");
  const auto b = slurp(dir / "b" / "summary.csv");
  gvc::fs::remove_all(dir);
  report(8, "determinism", rc == 0 && !a.empty() && a == b,
         fmt::format("exit status {}, summary.csv {} bytes, {}", rc, a.size(), a == b ? "byte-identical" : "DIFFERS"));
}

void transmission_oracle() {
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  int exhausted = 0;
  for (int i = 0; i < 1000; ++i) {
    // Sample times and start on a 1 ms grid.
    const int n = 1 + static_cast<int>(u(rng) * 20);
    std::vector<gvc::TraceSample> samples;
    std::vector<std::pair<double, double>> pairs;
    long ms = 0;
    for (int k = 0; k < n; ++k) {
      const double bw = u(rng) < 0.1 ? 0.0 : u(rng) * 6.0;
      samples.push_back({static_cast<double>(ms) * 1e-3, bw});
      pairs.emplace_back(samples.back().time_s, bw);
      ms += 1 + static_cast<long>(u(rng) * 4000);
    }
    const double duration = static_cast<double>(ms) * 1e-3;
    const gvc::ThroughputTrace trace(samples, duration);
    const long start_ms = static_cast<long>(u(rng) * static_cast<double>(ms) * 0.5);
    const double start = static_cast<double>(start_ms) * 1e-3;
    double capacity = 0.0;
    for (std::size_t k = 0; k < samples.size(); ++k) {
      const double lo = std::max(start, samples[k].time_s);
      const double hi = trace.segment_end(k);
      if (hi > lo) capacity += (hi - lo) * samples[k].bandwidth_mbps;
    }
    const double bits = capacity * 0.9 * u(rng);
    const double exact = gvc::transmission_time(trace, start, bits);
    const double stepped = oracle::integrate_until(pairs, duration, start, bits, 1e-3);
    if (stepped < 0.0) {
      ++exhausted;
      continue;
    }
    worst = std::max(worst, std::abs(exact - stepped));
  }
  report(9, "transmission oracle", worst <= 2e-3 && exhausted == 0,
         fmt::format("1000 traces, max |exact - 1 ms integration| = {:.3e} s (<= 2e-3), {} oracle exhaustions", worst,
                     exhausted));
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  controller_ordering();
  band_monotonicity();
  selector_oracle();
  buffer_and_lambda_suites();
  attention_suite();
  metric_identities();
  compare_determinism();
  transmission_oracle();

  const double acceptance_time = seconds_since(t0);
  const auto t1 = Clock::now();
  const int unit_rc = run_command(fmt::format("\"{}\" > /dev/null 2>&1", GVC_TESTS_PATH));
  const double unit_time = seconds_since(t1);
  const double total = acceptance_time + unit_time;
  report(10, "suite wall-clock", total < 60.0 && unit_rc == 0,
         fmt::format("unit suite {:.2f} s (exit {}), acceptance {:.2f} s, total {:.2f} s (< 60 s)", unit_time, unit_rc,
                     acceptance_time, total));

  fmt::print("{} of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
