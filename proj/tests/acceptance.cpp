// Acceptance checks: prints one PASS/FAIL line per criterion and exits nonzero on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "ac_fuzz.hpp"
#include "bsq/bsq.hpp"

namespace bsq {
namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

SphereVec random_unit(Rng& rng, std::size_t L) {
  Vec v(L);
  for (double& x : v) x = rng.normal();
  return project_to_sphere(v);
}

// Runs body(i) for i in [0, n) across hardware threads; each index writes only its own slot.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(n, std::thread::hardware_concurrency()));
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) body(i);
    });
  }
}

// Criteria 1 and 2 share the brute-force sweep.
struct FactorizationSweep {
  double max_prob_dev = 0.0;
  double max_entropy_dev = 0.0;
};

FactorizationSweep factorization_sweep() {
  constexpr std::size_t kVectors = 1000;
  const std::vector<unsigned> Ls{2, 4, 8, 12, 16};
  const std::vector<double> taus{0.01, 1.0, 10.0};
  std::vector<FactorizationSweep> per(Ls.size() * kVectors);
  parallel_for(per.size(), [&](std::size_t job) {
    const unsigned L = Ls[job / kVectors];
    Rng rng(mix_seed(101, job));
    const SphereVec u = random_unit(rng, L);
    FactorizationSweep& out = per[job];
    for (double tau : taus) {
      const SoftAssignment a = soft_assign(u, tau);
      const CodeDistribution product = factorized_code_dist(a.probs);
      const CodeDistribution brute = brute_force_code_dist(u.values, tau);
      for (std::size_t k = 0; k < brute.mass.size(); ++k) out.max_prob_dev = std::max(out.max_prob_dev, std::abs(product.mass[k] - brute.mass[k]));
      out.max_entropy_dev = std::max(out.max_entropy_dev, std::abs(per_sample_entropy(a) - distribution_entropy(brute)));
    }
  });
  FactorizationSweep total;
  for (const auto& p : per) {
    total.max_prob_dev = std::max(total.max_prob_dev, p.max_prob_dev);
    total.max_entropy_dev = std::max(total.max_entropy_dev, p.max_entropy_dev);
  }
  return total;
}

Outcome criterion3() {
  Outcome o;
  Rng rng(103);
  double min_gap = INFINITY;
  double mean_gap_cold = 0.0;
  int cold_batches = 0;
  for (unsigned L : {2U, 4U, 8U, 12U}) {
    for (double tau : {0.01, 1.0, 10.0, 100.0}) {
      for (int b = 0; b < 20; ++b) {
        std::vector<SphereVec> batch;
        const std::size_t n = 1 + rng.below(16);
        for (std::size_t i = 0; i < n; ++i) batch.push_back(random_unit(rng, L));
        const double gap = approximation_gap(batch, tau);
        min_gap = std::min(min_gap, gap);
        if (tau == 0.01) {
          mean_gap_cold += gap;
          ++cold_batches;
        }
      }
    }
  }
  mean_gap_cold /= cold_batches;
  o.pass = min_gap >= -1e-9 && mean_gap_cold <= 0.01;
  o.detail = fmt("min gap %.3g, mean gap at tau=0.01 %.3g", min_gap, mean_gap_cold);
  for (unsigned L : {4U, 8U}) {
    const Vec corner(L, code_magnitude(L));
    Vec opposite = corner;
    for (double& x : opposite) x = -x;
    const std::vector<SphereVec> pair{SphereVec{corner}, SphereVec{opposite}};
    const double gap = approximation_gap(pair, 100.0);
    const bool ok = gap >= 0.9 * (L - 1);
    o.pass = o.pass && ok;
    o.detail += fmt(", adversarial L=%.0f gap %.6f (need >= %.2f)", L, gap, 0.9 * (L - 1));
  }
  return o;
}

Outcome criterion4() {
  Outcome o;
  const McReport one = mc_quant_error(1, 1000000, 104, 8);
  o.pass = one.mean == 0.0 && bound_loose(4) == 1.0;
  o.detail = fmt("L=1 mean %.3g", one.mean);
  for (unsigned L : {2U, 4U, 9U, 16U, 36U}) {
    const McReport r = mc_quant_error(L, 1000000, 104 + L, 8);
    const double loose = bound_loose(L);
    const double tight = bound_tight(L);
    const bool ok = r.mean < loose && r.mean <= tight + 3.0 * r.std_error;
    o.pass = o.pass && ok;
    o.detail += fmt(", L=%.0f mean %.5f < %.5f", L, r.mean, loose);
  }
  return o;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Outcome criterion5() {
  Rng rng(105);
  GradCheckReport surrogate, dense, entropy, end_to_end;
  constexpr int kPoints = 100;
  for (int i = 0; i < kPoints; ++i) {
    const unsigned L = 1 + static_cast<unsigned>(rng.below(12));
    Vec v(L), up(L);
    for (double& x : v) x = rng.normal();
    for (double& x : up) x = rng.normal();
    const auto f = [&](std::span<const double> x) { return dot(bsq_surrogate(x), up); };
    surrogate.merge(grad_check(f, v, bsq_ste_backward(v, up)));
  }
  for (int i = 0; i < kPoints; ++i) {
    const std::size_t in = 1 + rng.below(9);
    const std::size_t out = 1 + rng.below(9);
    DenseLayer layer = DenseLayer::random(in, out, i % 2 ? Activation::Tanh : Activation::Identity, rng);
    for (double& b : layer.bias) b = rng.uniform(-0.5, 0.5);
    Vec x(in), up(out);
    for (double& z : x) z = rng.normal();
    for (double& z : up) z = rng.normal();
    const DenseGrad g = dense_backward(layer, x, up);
    dense.merge(grad_check([&](std::span<const double> z) { return dot(dense_forward(layer, z), up); }, x, g.input));
    dense.merge(grad_check(
        [&](std::span<const double> w) {
          DenseLayer l = layer;
          l.weights.assign(w.begin(), w.end());
          return dot(dense_forward(l, x), up);
        },
        layer.weights, g.weights));
    dense.merge(grad_check(
        [&](std::span<const double> b) {
          DenseLayer l = layer;
          l.bias.assign(b.begin(), b.end());
          return dot(dense_forward(l, x), up);
        },
        layer.bias, g.bias));
  }
  for (int i = 0; i < kPoints; ++i) {
    const unsigned L = 1 + static_cast<unsigned>(rng.below(10));
    const std::size_t n = 1 + rng.below(6);
    const double tau = rng.uniform(0.2, 4.0);
    const double gamma = rng.uniform(0.0, 2.0);
    Vec flat(n * L);
    for (double& x : flat) x = rng.normal();
    const auto batch_of = [&](std::span<const double> x) {
      std::vector<SoftAssignment> batch;
      for (std::size_t s = 0; s < n; ++s) batch.push_back(soft_assign(project_to_sphere(x.subspan(s * L, L)), tau));
      return batch;
    };
    const auto du = entropy_loss_grad_logits(batch_of(flat), gamma, 2.0 * tau * code_magnitude(L));
    Vec analytic;
    for (std::size_t s = 0; s < n; ++s) {
      const Vec gv = normalize_backward(std::span<const double>(flat).subspan(s * L, L), du[s]);
      analytic.insert(analytic.end(), gv.begin(), gv.end());
    }
    entropy.merge(grad_check([&](std::span<const double> x) { return entropy_loss(batch_of(x), gamma); }, flat, analytic));
  }
  {
    TrainConfig cfg;
    cfg.d = 8;
    cfg.L = 4;
    cfg.tau = 1.5;
    const ToyModel model = ToyModel::create(cfg.shape(), 105);
    const Dataset ds = make_synthetic_dataset("gabor", 5, 105);
    const Vec analytic = backward(model, forward(model, ds.patches, QuantMode::Surrogate), cfg);
    const auto f = [&](std::span<const double> p) {
      ToyModel m = model;
      m.set_flat_parameters(p);
      return total_loss(forward(m, ds.patches, QuantMode::Surrogate), cfg).total;
    };
    end_to_end = grad_check(f, model.flat_parameters(), analytic);
  }
  Outcome o;
  o.pass = surrogate.passed && dense.passed && entropy.passed && end_to_end.passed;
  o.detail = fmt("max rel err: surrogate %.2e, dense %.2e, entropy chain %.2e", surrogate.max_rel_err, dense.max_rel_err, entropy.max_rel_err) +
             fmt(", end-to-end d=8 L=4 %.2e", end_to_end.max_rel_err);
  return o;
}

Outcome criterion6() {
  constexpr std::uint64_t kCases = 10000;
  std::vector<int> round_trip(kCases, 0);
  std::vector<double> excess(kCases, 0.0);
  parallel_for(kCases, [&](std::size_t i) {
    const test::FuzzCase c = test::make_fuzz_case(i, 106);
    const BitStream s = ac_encode(c.symbols, c.model);
    round_trip[i] = ac_decode(s, c.model, c.symbols.size()) == c.symbols;
    excess[i] = static_cast<double>(s.size()) - stream_bits_lower_bound(c.model, c.symbols);
  });
  const std::size_t exact = static_cast<std::size_t>(std::count(round_trip.begin(), round_trip.end(), 1));
  const auto [lo, hi] = std::minmax_element(excess.begin(), excess.end());

  Rng rng(106);
  std::size_t max_small = 0;
  for (int i = 0; i < 256; ++i) {
    std::vector<std::uint32_t> bits(8);
    for (auto& b : bits) b = static_cast<std::uint32_t>(rng.below(2));
    max_small = std::max<std::size_t>(max_small, ac_encode(bits, ProbModel::uniform(2)).size());
  }
  Outcome o;
  o.pass = exact == kCases && *lo >= 0.0 && *hi <= 32.0 && max_small <= 40;
  o.detail = fmt("%.0f/%.0f exact round trips, excess bits in [%.3f, ", static_cast<double>(exact), kCases, *lo) +
             fmt("%.3f], uniform K=2 N=8 max %.0f bits", *hi, static_cast<double>(max_small));
  return o;
}

Outcome criterion7() {
  Rng rng(107);
  double g1_dev = 0.0;
  double gl_dev = 0.0;
  for (unsigned L = 1; L <= 12; ++L) {
    for (double tau : {0.01, 1.0, 10.0}) {
      for (int b = 0; b < 20; ++b) {
        std::vector<SphereVec> us;
        std::vector<SoftAssignment> batch;
        const std::size_t n = 1 + rng.below(8);
        for (std::size_t i = 0; i < n; ++i) {
          us.push_back(random_unit(rng, L));
          batch.push_back(soft_assign(us.back(), tau));
        }
        g1_dev = std::max(g1_dev, std::abs(grouped_entropy(batch, 1) - mean_per_sample_entropy(batch)));
        double brute = 0.0;
        for (const auto& u : us) brute += distribution_entropy(brute_force_code_dist(u.values, tau));
        brute /= static_cast<double>(n);
        gl_dev = std::max(gl_dev, std::abs(grouped_entropy(batch, L) - brute));
      }
    }
  }
  Outcome o;
  o.pass = g1_dev == 0.0 && gl_dev <= 1e-9;
  o.detail = fmt("g=1 max deviation %.3g, g=L max deviation %.3g", g1_dev, gl_dev);
  return o;
}

Outcome criterion8() {
  const Dataset ds = make_synthetic_dataset("low-rank", 1024, 42);
  TrainConfig ref;
  ref.seed = 0;
  TrainConfig ablation = ref;
  ablation.gamma = 0.0;
  TrainResult a, b, c;
  {
    std::jthread t1([&] { a = train(ref, ds); });
    std::jthread t2([&] { b = train(ref, ds); });
    std::jthread t3([&] { c = train(ablation, ds); });
  }
  const bool halves = a.report.final_mse <= 0.5 * a.report.initial_mse;
  const bool reproducible = a.report == b.report && a.model.flat_parameters() == b.model.flat_parameters();
  const bool usage_drops = c.report.code_usage < a.report.code_usage;
  Outcome o;
  o.pass = halves && reproducible && usage_drops;
  o.detail = fmt("mse %.5f -> %.5f, ", a.report.initial_mse, a.report.final_mse) + (reproducible ? "bit-reproducible" : "NOT reproducible") +
             fmt(", code usage gamma=1 %.4f vs gamma=0 %.4f", a.report.code_usage, c.report.code_usage);
  return o;
}

Outcome criterion9() {
  // Each state has four equiprobable successors, so the entropy rate is 2 bits per 8-bit token.
  constexpr unsigned L = 8;
  constexpr std::size_t N = std::size_t{1} << 18;
  Rng rng(109);
  TokenFile f;
  f.L = L;
  f.T = 1;
  f.H = 512;
  f.W = 512;
  std::uint64_t s = 0;
  for (std::size_t i = 0; i < N; ++i) {
    s = (5 * s + 3 + rng.below(4)) % 256;
    f.codes.push_back(s);
  }
  const CompressedFile c = compress(f, ModelKind::ContextK, 1);
  const bool lossless = decompress(deserialize_compressed(serialize_compressed(c))) == f;
  const StatsReport st = compute_stats(f, &c);
  Outcome o;
  o.pass = lossless && *st.savings >= 0.20;
  o.detail = fmt("entropy rate 2 bits/token, coded %.4f bits/token, savings %.2f%%", static_cast<double>(*st.coded_bits) / N, 100.0 * *st.savings) +
             (lossless ? ", lossless" : ", NOT lossless");
  return o;
}

Outcome criterion10() {
  std::size_t configs = 0;
  bool ok = blockwise_causal_mask(1, 1).allow == std::vector<bool>{true};
  for (std::size_t n = 1; n <= 256; ++n) ok = ok && blockwise_causal_mask(1, n).allow == std::vector<bool>(n * n, true);
  for (std::size_t T = 1; T <= 256 && ok; ++T) {
    for (std::size_t n = 1; T * n <= 256 && ok; ++n) {
      ++configs;
      const BlockMask m = blockwise_causal_mask(T, n);
      const std::size_t N = T * n;
      for (std::size_t i = 0; i < N && ok; ++i) {
        for (std::size_t j = 0; j < N; ++j) {
          const bool future = j / n > i / n;
          const bool same_frame = j / n == i / n;
          if (future && m.at(i, j)) ok = false;       // no leakage
          if (same_frame && !m.at(i, j)) ok = false;  // within-frame completeness
          if (!future && !m.at(i, j)) ok = false;
        }
      }
      for (std::size_t t = 1; t <= T && ok; ++t) ok = prefix_restriction(m, t) == blockwise_causal_mask(t, n);
    }
  }
  Outcome o;
  o.pass = ok;
  o.detail = fmt("%.0f (T, tokens_per_frame) configurations with N <= 256", static_cast<double>(configs));
  return o;
}

}  // namespace
}  // namespace bsq

int main() {
  using namespace bsq;
  using Clock = std::chrono::steady_clock;
  bool all = true;
  const auto report = [&](int id, const char* name, const std::function<Outcome()>& run) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    all = all && o.pass;
    std::printf("criterion %2d %-26s %s  (%.1fs) %s\n", id, name, o.pass ? "PASS" : "FAIL", secs, o.detail.c_str());
    std::fflush(stdout);
  };

  FactorizationSweep sweep;
  report(1, "factorization", [&] {
    sweep = factorization_sweep();
    return Outcome{sweep.max_prob_dev <= 1e-9, fmt("max |product - softmax| %.3g", sweep.max_prob_dev)};
  });
  report(2, "entropy factorization", [&] { return Outcome{sweep.max_entropy_dev <= 1e-9, fmt("max entropy deviation %.3g bits", sweep.max_entropy_dev)}; });
  report(3, "dataset entropy bound", criterion3);
  report(4, "quantization error bound", criterion4);
  report(5, "gradient checks", criterion5);
  report(6, "arithmetic coder", criterion6);
  report(7, "grouped entropy", criterion7);
  report(8, "toy training", criterion8);
  report(9, "compression gain", criterion9);
  report(10, "block causal mask", criterion10);
  return all ? 0 : 1;
}
