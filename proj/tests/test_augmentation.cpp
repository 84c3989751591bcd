#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "eegdt/augmentation.hpp"
#include "eegdt/errors.hpp"
#include "support.hpp"

using namespace eegdt;
using ad::Tape;
using ad::Var;

namespace {

double entropy(const SoftLabel& y) {
  double h = 0.0;
  for (double p : y.probs)
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

std::vector<SignalSegment> labeled_pool(size_t n, uint32_t k, size_t len, uint64_t seed) {
  std::vector<SignalSegment> pool;
  for (size_t i = 0; i < n; ++i) pool.push_back(testing::random_segment(2, len, seed + i, static_cast<uint32_t>(i % k)));
  return pool;
}

// Segment whose samples are all distinct: channel c, index i -> offset + c * 1000 + i.
SignalSegment ramp(size_t ch, size_t len, double offset) {
  std::vector<double> d(ch * len);
  for (size_t c = 0; c < ch; ++c)
    for (size_t i = 0; i < len; ++i) d[c * len + i] = offset + 1000.0 * c + i;
  return SignalSegment(ch, len, d);
}

std::vector<double> plain_log_softmax(const std::vector<double>& z) {
  double m = *std::max_element(z.begin(), z.end()), s = 0.0;
  for (double v : z) s += std::exp(v - m);
  std::vector<double> out;
  for (double v : z) out.push_back(v - m - std::log(s));
  return out;
}

}  // namespace

TEST_SUITE("labels") {
  TEST_CASE("smoothing examples") {
    CHECK(smooth_labels(1, 0.9, 2).probs[0] == doctest::Approx(0.05).epsilon(1e-15));
    CHECK(smooth_labels(1, 0.9, 2).probs[1] == doctest::Approx(0.95).epsilon(1e-15));
    CHECK(smooth_labels(2, 1.0, 4) == one_hot(2, 4));
    CHECK(smooth_labels(3, 0.0, 4).probs == std::vector<double>(4, 0.25));
    CHECK_THROWS_AS(smooth_labels(2, 0.9, 2), InvalidArgument);
    CHECK_THROWS_AS(smooth_labels(0, 1.5, 2), InvalidArgument);
  }

  TEST_CASE("smoothing sums to one and raises entropy") {
    Rng rng(5);
    for (int i = 0; i < 2000; ++i) {
      const uint32_t k = static_cast<uint32_t>(rng.uniform_int(2, 10));
      const uint32_t y = static_cast<uint32_t>(rng.uniform_int(0, k - 1));
      const double beta = i % 10 == 0 ? 1.0 : rng.uniform();
      const auto s = smooth_labels(y, beta, k);
      CHECK(s.valid(1e-12));
      if (beta < 1.0) CHECK(entropy(s) > entropy(one_hot(y, k)));
      else CHECK(entropy(s) == entropy(one_hot(y, k)));
    }
  }

  TEST_CASE("mixing examples") {
    const auto m = mix_labels(SoftLabel{{1, 0}}, SoftLabel{{0.05, 0.95}}, 0.5);
    CHECK(m.probs[0] == doctest::Approx(0.525).epsilon(1e-15));
    CHECK(m.probs[1] == doctest::Approx(0.475).epsilon(1e-15));
    CHECK(mix_labels(SoftLabel{{1, 0}}, SoftLabel{{0.05, 0.95}}, 1.0).probs == std::vector<double>{1, 0});
    CHECK(mix_labels(SoftLabel{{1, 0}}, SoftLabel{{0.05, 0.95}}, 0.0).probs == std::vector<double>{0.05, 0.95});
    CHECK_THROWS_AS(mix_labels(SoftLabel{{1, 0}}, SoftLabel{{0, 0, 1}}, 0.5), InvalidArgument);
  }

  TEST_CASE("mixing preserves the simplex") {
    Rng rng(6);
    for (int i = 0; i < 2000; ++i) {
      const uint32_t k = static_cast<uint32_t>(rng.uniform_int(2, 6));
      const auto a = smooth_labels(static_cast<uint32_t>(rng.uniform_int(0, k - 1)), rng.uniform(), k);
      const auto b = smooth_labels(static_cast<uint32_t>(rng.uniform_int(0, k - 1)), rng.uniform(), k);
      CHECK(mix_labels(a, b, rng.uniform()).valid(1e-12));
    }
  }
}

TEST_SUITE("lambda") {
  TEST_CASE("alpha = 1 is uniform") {
    Rng rng(42);
    std::vector<double> x(100000);
    for (double& v : x) v = sample_lambda(1.0, rng);
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= x.size();
    CHECK(std::abs(mean - 0.5) <= 0.005);
    std::sort(x.begin(), x.end());
    double ks = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
      const double n = static_cast<double>(x.size());
      ks = std::max({ks, std::abs((i + 1) / n - x[i]), std::abs(x[i] - i / n)});
    }
    CHECK(ks < 0.01);
  }

  TEST_CASE("symmetric mean for any alpha") {
    for (double alpha : {0.1, 0.4, 2.0, 7.5}) {
      Rng rng(static_cast<uint64_t>(alpha * 100));
      const size_t n = 100000;
      double sum = 0.0;
      for (size_t i = 0; i < n; ++i) {
        const double v = sample_lambda(alpha, rng);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        sum += v;
      }
      const double sd = std::sqrt(1.0 / (4.0 * (2.0 * alpha + 1.0)));
      CHECK(std::abs(sum / n - 0.5) <= 4.0 * sd / std::sqrt(static_cast<double>(n)));
    }
  }

  TEST_CASE("seeded draws repeat; bad alpha throws") {
    CHECK(sample_lambda(0.7, uint64_t{9}) == sample_lambda(0.7, uint64_t{9}));
    CHECK_THROWS_AS(sample_lambda(0.0, uint64_t{1}), InvalidArgument);
    CHECK_THROWS_AS(sample_lambda(-1.0, uint64_t{1}), InvalidArgument);
  }
}

TEST_SUITE("reassemble") {
  TEST_CASE("boundary lambdas return a source unchanged") {
    const auto o = testing::random_segment(3, 20, 1), g = testing::random_segment(3, 20, 2);
    for (uint64_t seed = 0; seed < 20; ++seed) {
      const auto a = reassemble(o, g, 1.0, seed);
      CHECK(a.x.data() == o.data());
      CHECK(a.lambda_actual == 1.0);
      const auto b = reassemble(o, g, 0.0, seed);
      CHECK(b.x.data() == g.data());
      CHECK(b.lambda_actual == 0.0);
    }
  }

  TEST_CASE("four-sample worked example") {
    const SignalSegment o(1, 4, {1, 2, 3, 4}), g(1, 4, {9, 8, 7, 6});
    // Find a seed whose stream reads start_orig = 1 (of [0, 2]), start_gen = 2
    // (of [0, 2]) and order bit 0 (original first).
    uint64_t seed = 0;
    for (;; ++seed) {
      Rng rng(seed);
      const auto so = rng.uniform_int(0, 2), sg = rng.uniform_int(0, 2), order = rng.uniform_int(0, 1);
      if (so == 1 && sg == 2 && order == 0) break;
      REQUIRE(seed < 10000);
    }
    const auto r = reassemble(o, g, 0.5, seed);
    CHECK(r.start_orig == 1);
    CHECK(r.start_gen == 2);
    CHECK(r.orig_first);
    CHECK(r.x.data() == std::vector<double>{2, 3, 7, 6});
    CHECK(r.lambda_actual == 0.5);
    CHECK(reassemble_at(o, g, 2, 1, 2, false).x.data() == std::vector<double>{7, 6, 2, 3});
  }

  TEST_CASE("output length and sample provenance") {
    Rng rng(3);
    for (int trial = 0; trial < 500; ++trial) {
      const size_t ch = rng.uniform_int(1, 3), len = rng.uniform_int(1, 40);
      const auto o = ramp(ch, len, 0.0), g = ramp(ch, len, 0.5);
      const double lambda = rng.uniform();
      const auto r = reassemble(o, g, lambda, trial);
      REQUIRE(r.x.length() == len);
      REQUIRE(r.x.channels() == ch);
      const size_t n1 = static_cast<size_t>(std::llround(lambda * len));
      CHECK(r.lambda_actual == static_cast<double>(n1) / len);
      for (size_t c = 0; c < ch; ++c) {
        size_t from_orig = 0;
        std::vector<double> seen;
        for (size_t i = 0; i < len; ++i) {
          const double v = r.x.at(c, i);
          const bool is_orig = v == std::floor(v);
          from_orig += is_orig;
          // value belongs to this channel of one source
          const double idx = (is_orig ? v : v - 0.5) - 1000.0 * c;
          CHECK(idx >= 0);
          CHECK(idx < len);
          seen.push_back(v);
        }
        CHECK(from_orig == n1);
        std::sort(seen.begin(), seen.end());
        CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
      }
      // all channels share one window
      if (ch > 1)
        for (size_t i = 0; i < len; ++i) CHECK(r.x.at(1, i) - r.x.at(0, i) == 1000.0);
    }
  }

  TEST_CASE("shape mismatch is rejected") {
    CHECK_THROWS_AS(reassemble(testing::random_segment(1, 8, 1), testing::random_segment(1, 9, 2), 0.5, 1),
                    InvalidArgument);
    CHECK_THROWS_AS(reassemble(testing::random_segment(1, 8, 1), testing::random_segment(2, 8, 2), 0.5, 1),
                    InvalidArgument);
  }
}

TEST_SUITE("vicinal batch") {
  TEST_CASE("eight originals give eight valid samples, deterministically") {
    const auto origs = labeled_pool(8, 3, 32, 100);
    std::vector<const SignalSegment*> ptrs;
    for (const auto& s : origs) ptrs.push_back(&s);
    const auto pool = labeled_pool(5, 3, 32, 200);
    const GoConfig cfg;
    const auto a = make_vicinal_batch(ptrs, pool, 3, cfg, 7);
    REQUIRE(a.size() == 8);
    for (size_t i = 0; i < 8; ++i) {
      CHECK(a[i].y_vic.valid(1e-12));
      CHECK(a[i].x_vic.length() == 32);
      CHECK(a[i].partner < pool.size());
      const auto expect = mix_labels(one_hot(*origs[i].label(), 3),
                                     smooth_labels(*pool[a[i].partner].label(), cfg.beta_smooth, 3),
                                     a[i].lambda_actual);
      CHECK(a[i].y_vic == expect);
    }
    const auto b = make_vicinal_batch(ptrs, pool, 3, cfg, 7);
    for (size_t i = 0; i < 8; ++i) {
      CHECK(a[i].x_vic == b[i].x_vic);
      CHECK(a[i].y_vic == b[i].y_vic);
    }
  }

  TEST_CASE("single-segment pool is always the partner") {
    const auto origs = labeled_pool(6, 2, 16, 1);
    std::vector<const SignalSegment*> ptrs;
    for (const auto& s : origs) ptrs.push_back(&s);
    const auto pool = labeled_pool(1, 2, 16, 50);
    for (const auto& v : make_vicinal_batch(ptrs, pool, 2, GoConfig{}, 3)) CHECK(v.partner == 0);
  }

  TEST_CASE("same-class pairing and errors") {
    const auto origs = labeled_pool(10, 2, 16, 1);
    std::vector<const SignalSegment*> ptrs;
    for (const auto& s : origs) ptrs.push_back(&s);
    const auto pool = labeled_pool(9, 3, 16, 50);
    GoConfig cfg;
    cfg.same_class_pairs = true;
    const auto v = make_vicinal_batch(ptrs, pool, 3, cfg, 4);
    for (size_t i = 0; i < v.size(); ++i) CHECK(*pool[v[i].partner].label() == *origs[i].label());
    CHECK_THROWS_AS(make_vicinal_batch(ptrs, {}, 3, GoConfig{}, 1), InvalidArgument);
    std::vector<SignalSegment> unlabeled{testing::random_segment(2, 16, 3)};
    CHECK_THROWS_AS(make_vicinal_batch(ptrs, unlabeled, 3, GoConfig{}, 1), InvalidArgument);
  }
}

TEST_SUITE("go loss") {
  TEST_CASE("matching vicinal prediction leaves only cross-entropy") {
    Tape tape;
    const SoftLabel yv{{0.2, 0.5, 0.3}};
    const Var lv = tape.constant(Tensor({1, 3}, {std::log(0.2), std::log(0.5), std::log(0.3)}));
    const Var lo = tape.constant(Tensor({1, 3}, {0.3, -1.0, 2.0}));
    const Var kl = kl_divergence_sum(lv, {yv});
    CHECK(std::abs(kl.item()) < 1e-15);
    const Var total = go_loss(lo, {one_hot(1, 3)}, lv, {yv}, 1.0);
    const double ce = -plain_log_softmax({0.3, -1.0, 2.0})[1];
    CHECK(total.item() == doctest::Approx(ce).epsilon(1e-14));
  }

  TEST_CASE("eta = 0 is plain cross-entropy") {
    Tape tape;
    const Var lo = tape.constant(testing::random_tensor({4, 3}, 1));
    const Var lv = tape.constant(testing::random_tensor({4, 3}, 2));
    std::vector<SoftLabel> yo, yv;
    for (uint32_t i = 0; i < 4; ++i) {
      yo.push_back(one_hot(i % 3, 3));
      yv.push_back(smooth_labels(i % 3, 0.7, 3));
    }
    const double ce = soft_cross_entropy_sum(lo, yo).item() / 4.0;
    CHECK(go_loss(lo, yo, lv, yv, 0.0).item() == ce);
  }

  TEST_CASE("closed-form binary example") {
    Tape tape;
    const Var z = tape.constant(Tensor({1, 2}, {0.0, 0.0}));
    const auto v = go_loss(z, {SoftLabel{{1, 0}}}, z, {SoftLabel{{0.5, 0.5}}}, 1.0).item();
    CHECK(v == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    const auto val = go_loss_value({{0, 0}}, {SoftLabel{{1, 0}}}, {{0, 0}}, {SoftLabel{{0.5, 0.5}}}, 1.0);
    CHECK(val.ce == doctest::Approx(0.6931471805599453).epsilon(1e-15));
    CHECK(std::abs(val.kl) < 1e-15);
  }

  TEST_CASE("nonnegative with one-hot originals; matches the plain evaluation") {
    Rng rng(8);
    for (int trial = 0; trial < 300; ++trial) {
      const uint32_t k = static_cast<uint32_t>(rng.uniform_int(2, 5));
      const size_t n = rng.uniform_int(1, 6);
      std::vector<std::vector<double>> lo(n, std::vector<double>(k)), lv = lo;
      std::vector<SoftLabel> yo, yv;
      for (size_t i = 0; i < n; ++i) {
        for (auto& v : lo[i]) v = rng.normal(0, 3);
        for (auto& v : lv[i]) v = rng.normal(0, 3);
        yo.push_back(one_hot(static_cast<uint32_t>(rng.uniform_int(0, k - 1)), k));
        yv.push_back(mix_labels(one_hot(static_cast<uint32_t>(rng.uniform_int(0, k - 1)), k),
                                smooth_labels(static_cast<uint32_t>(rng.uniform_int(0, k - 1)), 0.9, k),
                                rng.uniform()));
      }
      const double eta = rng.uniform(0, 2);
      Tape tape;
      Tensor to({n, k}), tv({n, k});
      for (size_t i = 0; i < n; ++i)
        for (size_t c = 0; c < k; ++c) {
          to[i * k + c] = lo[i][c];
          tv[i * k + c] = lv[i][c];
        }
      const double a = go_loss(tape.constant(to), yo, tape.constant(tv), yv, eta).item();
      const auto b = go_loss_value(lo, yo, lv, yv, eta);
      CHECK(a >= 0.0);
      CHECK(a == doctest::Approx(b.total).epsilon(1e-12));
      CHECK(b.kl >= -1e-15);
    }
  }

  TEST_CASE("logit gradients match central differences") {
    Rng rng(9);
    for (int trial = 0; trial < 50; ++trial) {
      const size_t n = 3, k = 4;
      Tensor to = testing::random_tensor({n, k}, trial, 2.0), tv = testing::random_tensor({n, k}, trial + 500, 2.0);
      std::vector<SoftLabel> yo, yv;
      for (size_t i = 0; i < n; ++i) {
        yo.push_back(one_hot(static_cast<uint32_t>(rng.uniform_int(0, k - 1)), k));
        yv.push_back(mix_labels(one_hot(static_cast<uint32_t>(rng.uniform_int(0, k - 1)), k),
                                smooth_labels(static_cast<uint32_t>(rng.uniform_int(0, k - 1)), 0.9, k),
                                rng.uniform()));
      }
      const double eta = 0.7;
      Tape tape;
      const Var vo = tape.variable(to), vv = tape.variable(tv);
      tape.backward(go_loss(vo, yo, vv, yv, eta));
      const auto go = tape.grad(vo.id()), gv = tape.grad(vv.id());
      auto f = [&](const Tensor& a, const Tensor& b) {
        Tape t2(false);
        return go_loss(t2.constant(a), yo, t2.constant(b), yv, eta).item();
      };
      // Five-point stencil keeps truncation and rounding error well below the tolerance.
      const double h = 1e-3;
      auto stencil = [&](const Tensor& base, size_t e, bool first) {
        double acc = 0.0;
        for (auto [off, w] : {std::pair{2.0, -1.0}, {1.0, 8.0}, {-1.0, -8.0}, {-2.0, 1.0}}) {
          Tensor x = base;
          x[e] += off * h;
          acc += w * (first ? f(x, tv) : f(to, x));
        }
        return acc / (12 * h);
      };
      for (size_t e = 0; e < n * k; ++e) {
        CHECK(testing::rel_err(go[e], stencil(to, e, true)) < 1e-6);
        CHECK(testing::rel_err(gv[e], stencil(tv, e, false)) < 1e-6);
      }
    }
  }

  TEST_CASE("log-probabilities are floored so extreme logits stay finite") {
    Tape tape;
    const Var z = tape.variable(Tensor({1, 2}, {0.0, 1000.0}));
    const Var l = go_loss(z, {one_hot(0, 2)}, z, {SoftLabel{{1, 0}}}, 1.0);
    CHECK(std::isfinite(l.item()));
    CHECK(l.item() == doctest::Approx(-2.0 * std::log(1e-12)).epsilon(1e-12));
    CHECK_THROWS_AS(go_loss(tape.constant(Tensor({1, 2}, {std::nan(""), 0.0})), {one_hot(0, 2)}, z,
                            {one_hot(0, 2)}, 1.0),
                    NumericalError);
  }

  TEST_CASE("direct incorporation is the lambda = 0, beta = 1 corner") {
    const auto xo = testing::random_segment(1, 16, 1, 0u), xg = testing::random_segment(1, 16, 2, 1u);
    const auto r = reassemble(xo, xg, 0.0, 5);
    CHECK(r.x.data() == xg.data());
    const auto y = mix_labels(one_hot(0, 3), smooth_labels(1, 1.0, 3), r.lambda_actual);
    CHECK(y == one_hot(1, 3));
    Tape tape;
    const Var lo = tape.constant(testing::random_tensor({1, 3}, 3));
    const Var lg = tape.constant(testing::random_tensor({1, 3}, 4));
    const double eta = 0.6;
    const double ce_gen = soft_cross_entropy_sum(lg, {one_hot(1, 3)}).item();
    CHECK(kl_divergence_sum(lg, {y}).item() == ce_gen);
    CHECK(go_loss(lo, {one_hot(0, 3)}, lg, {y}, eta).item() ==
          doctest::Approx(soft_cross_entropy_sum(lo, {one_hot(0, 3)}).item() + eta * ce_gen).epsilon(1e-15));
  }
}

TEST_CASE("GoConfig JSON roundtrip and validation") {
  GoConfig c;
  c.beta_smooth = 0.8;
  c.alpha = 0.3;
  c.eta = 2.0;
  c.same_class_pairs = true;
  const nlohmann::json j = c;
  const auto back = j.get<GoConfig>();
  CHECK(back.beta_smooth == 0.8);
  CHECK(back.alpha == 0.3);
  CHECK(back.eta == 2.0);
  CHECK(back.same_class_pairs);
  c.alpha = 0.0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
}
