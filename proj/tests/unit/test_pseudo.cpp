#include <doctest.h>

#include <cmath>

#include "fvp/pseudo.hpp"
#include "fvp/segnet.hpp"
#include "helpers.hpp"
#include "oracles/selection_oracle.hpp"

using namespace fvp;

namespace {

RealGrid grid_from(int H, int W, int C, std::initializer_list<double> values) {
  RealGrid g(H, W, C);
  std::size_t i = 0;
  for (double v : values) g[i++] = v;
  return g;
}

SegOutput prediction(const RealGrid& probs, const RealGrid& features) { return SegOutput{probs, RealGrid(), features}; }

// Probabilities drawn from a coarse lattice so that threshold and argmax ties occur often.
RealGrid lattice_probs(int H, int W, int C, Rng& rng) {
  RealGrid p(H, W, C);
  for (int h = 0; h < H; ++h)
    for (int w = 0; w < W; ++w) {
      double total = 0.0;
      for (int c = 0; c < C; ++c) total += p(h, w, c) = static_cast<double>(rng.below(5));
      if (total == 0.0) {
        p(h, w, 0) = total = 1.0;
      }
      for (int c = 0; c < C; ++c) p(h, w, c) /= total;
    }
  return p;
}

}  // namespace

TEST_CASE("selection defaults") {
  const SelectionConfig cfg;
  CHECK(cfg.lambda == 0.01);
  CHECK(cfg.k == 0.8);
  CHECK(cfg.use_global);
  CHECK(cfg.use_intra);
  CHECK(cfg.use_prototype);
  SelectionConfig bad;
  bad.k = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad.k = 1.5;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = SelectionConfig{};
  bad.lambda = -0.1;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("threshold rank") {
  CHECK(threshold_rank(0.5, 4) == 2);
  CHECK(threshold_rank(0.7, 10) == 7);
  CHECK(threshold_rank(0.8, 4096) == 3277);
  CHECK(threshold_rank(1.0, 9) == 9);
  CHECK(threshold_rank(1e-9, 9) == 1);
}

TEST_CASE("intra-class threshold picks the ranked value") {
  const RealGrid p = grid_from(2, 2, 1, {0.9, 0.8, 0.1, 0.05});
  CHECK(intra_class_thresholds(p, 0.5)[0] == 0.8);
  CHECK(intra_class_thresholds(p, 1.0)[0] == 0.05);
  CHECK(intra_class_thresholds(p, 0.25)[0] == 0.9);
  CHECK_THROWS_AS(intra_class_thresholds(p, 0.0), Error);
}

TEST_CASE("two-pixel double-threshold example") {
  const RealGrid p = grid_from(1, 2, 2, {0.7, 0.3, 0.2, 0.8});
  const std::vector<double> delta = intra_class_thresholds(p, 0.5);
  CHECK(delta == std::vector<double>{0.7, 0.8});
  const RealGrid ph = select_probs(p, delta, 0.01);
  CHECK(ph == grid_from(1, 2, 2, {0.7, 0.0, 0.0, 0.8}));
  const ReliableLabel label = make_pseudo_label(ph);
  CHECK(label.y[0] == 0);
  CHECK(label.y[1] == 1);
  CHECK(label.mask[0] == 1);
  CHECK(label.mask[1] == 1);
  CHECK(label.selected_fraction() == 1.0);
}

TEST_CASE("permissive thresholds keep everything") {
  Rng rng(1);
  const RealGrid p = fvp::test::random_probs(4, 4, 3, rng);
  CHECK(select_probs(p, intra_class_thresholds(p, 1.0), 0.0) == p);
}

TEST_CASE("global threshold above every value zeroes everything") {
  const RealGrid p(3, 3, 2, 0.005);
  const RealGrid ph = select_probs(p, std::vector<double>{0.0, 0.0}, 0.01);
  for (double v : ph.values()) CHECK(v == 0.0);
  const ReliableLabel label = make_pseudo_label(ph);
  for (auto t : label.mask.values()) CHECK(t == 0);
  CHECK(label.selected_fraction() == 0.0);
}

TEST_CASE("argmax ties go to the lowest class") {
  const ReliableLabel label = make_pseudo_label(grid_from(1, 2, 3, {0.4, 0.4, 0.2, 0.0, 0.3, 0.3}));
  CHECK(label.y[0] == 0);
  CHECK(label.y[1] == 1);
}

TEST_CASE("prototypes") {
  SUBCASE("uniform weights give the plain mean") {
    Rng rng(2);
    const RealGrid f = fvp::test::random_real(3, 3, 4, 3);
    const Prototypes z = prototypes(f, RealGrid(3, 3, 1, 1.0));
    CHECK(z.active[0]);
    for (int l = 0; l < 4; ++l) {
      double mean = 0.0;
      for (int p = 0; p < 9; ++p) mean += f[p * 4 + l];
      CHECK(z.centers[0][l] == doctest::Approx(mean / 9.0).epsilon(1e-14));
    }
  }
  SUBCASE("zero mass marks the class inactive") {
    const Prototypes z = prototypes(RealGrid(2, 2, 3, 1.0), RealGrid(2, 2, 2, 0.0));
    CHECK_FALSE(z.active[0]);
    CHECK_FALSE(z.any_active());
    CHECK(z.centers[1] == std::vector<double>(3, 0.0));
  }
  SUBCASE("weighted two-pixel mean") {
    const Prototypes z = prototypes(grid_from(1, 2, 2, {1.0, 0.0, 0.0, 1.0}), grid_from(1, 2, 1, {0.75, 0.25}));
    CHECK(z.centers[0][0] == doctest::Approx(0.75));
    CHECK(z.centers[0][1] == doctest::Approx(0.25));
  }
}

TEST_CASE("prototype refinement") {
  SUBCASE("single active class leaves T unchanged") {
    const RealGrid ph = grid_from(1, 3, 2, {0.9, 0.0, 0.6, 0.0, 0.0, 0.0});
    const ReliableLabel label = make_pseudo_label(ph);
    const RealGrid f = fvp::test::random_real(1, 3, 2, 4);
    CHECK(prototype_refine(label, f, prototypes(f, ph)) == label.mask);
  }
  SUBCASE("pixel B closer to the other prototype is dropped") {
    // A: class 0 with feature 0; B: class 1 with feature 0.9; C: class 1 with feature 1.
    const RealGrid ph = grid_from(1, 3, 2, {0.9, 0.0, 0.0, 0.1, 0.0, 0.9});
    const RealGrid f = grid_from(1, 3, 1, {0.0, 0.2, 1.0});
    const ReliableLabel label = make_pseudo_label(ph);
    const Prototypes z = prototypes(f, ph);
    // z0 = 0, z1 = (0.1 * 0.2 + 0.9 * 1.0) / 1.0 = 0.92; B at 0.2 is nearer z0.
    CHECK(z.centers[1][0] == doctest::Approx(0.92));
    const LabelGrid refined = prototype_refine(label, f, z);
    CHECK(refined[0] == 1);
    CHECK(refined[1] == 0);
    CHECK(refined[2] == 1);
  }
  SUBCASE("all inactive is an error") {
    const ReliableLabel label = make_pseudo_label(RealGrid(1, 1, 2));
    CHECK_THROWS_AS(prototype_refine(label, RealGrid(1, 1, 1), prototypes(RealGrid(1, 1, 1), RealGrid(1, 1, 2))),
                    Error);
  }
}

TEST_CASE("random 4x4 refinement matches brute force") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const RealGrid p = fvp::test::random_probs(4, 4, 3, rng);
    const RealGrid f = fvp::test::random_real(4, 4, 3, 100 + trial);
    SelectionConfig cfg;
    const ReliableLabel got = reliable_labels(prediction(p, f), cfg);
    const auto want = oracle::brute_reliable(p, f, cfg.lambda, cfg.k, true, true, true);
    CHECK(got.mask == want.mask);
  }
}

TEST_CASE("full selection matches brute force on random small instances") {
  Rng rng(6);
  for (int trial = 0; trial < 300; ++trial) {
    const int H = 1 + static_cast<int>(rng.below(8)), W = 1 + static_cast<int>(rng.below(8));
    const int C = 2 + static_cast<int>(rng.below(3)), L = 1 + static_cast<int>(rng.below(4));
    const RealGrid p = trial % 2 ? lattice_probs(H, W, C, rng) : fvp::test::random_probs(H, W, C, rng);
    const RealGrid f = fvp::test::random_real(H, W, L, 1000 + trial);
    SelectionConfig cfg;
    cfg.lambda = rng.uniform(0.0, 0.2);
    cfg.k = 1.0 - rng.uniform(0.0, 1.0);  // (0, 1]
    cfg.use_global = rng.below(4) != 0;
    cfg.use_intra = rng.below(4) != 0;
    cfg.use_prototype = rng.below(4) != 0;
    const ReliableLabel got = reliable_labels(prediction(p, f), cfg);
    const auto want = oracle::brute_reliable(p, f, cfg.lambda, cfg.k, cfg.use_global, cfg.use_intra, cfg.use_prototype);
    INFO("trial " << trial);
    CHECK(got.mask == want.mask);
    for (std::size_t i = 0; i < got.mask.size(); ++i)
      if (got.mask[i]) CHECK(got.y[i] == want.y[i]);
  }
}

TEST_CASE("selection invariants") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const RealGrid p = fvp::test::random_probs(6, 6, 4, rng);
    const RealGrid f = fvp::test::random_real(6, 6, 3, 2000 + trial);
    const double lambda = rng.uniform(0.0, 0.2), k = rng.uniform(0.05, 1.0);
    const std::vector<double> delta = intra_class_thresholds(p, k);
    const RealGrid ph = select_probs(p, delta, lambda);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK((ph[i] == 0.0 || ph[i] == p[i]));
    const ReliableLabel label = make_pseudo_label(ph);
    for (std::size_t px = 0; px < label.mask.size(); ++px) {
      bool survives = false;
      for (int c = 0; c < 4; ++c) survives |= p[px * 4 + c] >= delta[c] && p[px * 4 + c] >= lambda;
      CHECK(static_cast<bool>(label.mask[px]) == survives);
    }
    SelectionConfig on, off;
    on.lambda = off.lambda = lambda;
    on.k = off.k = k;
    off.use_prototype = false;
    const ReliableLabel with = reliable_labels(prediction(p, f), on);
    const ReliableLabel without = reliable_labels(prediction(p, f), off);
    for (std::size_t px = 0; px < with.mask.size(); ++px) CHECK(with.mask[px] <= without.mask[px]);
  }
}

TEST_CASE("minority classes keep a pixel under the intra-class threshold") {
  // Class 0 dominates; class 2 appears in one pixel with a channel maximum above lambda.
  RealGrid p(4, 4, 3);
  for (int i = 0; i < 16; ++i) {
    p[i * 3 + 0] = 0.96;
    p[i * 3 + 1] = 0.03;
    p[i * 3 + 2] = 0.01;
  }
  p[5 * 3 + 0] = 0.2;
  p[5 * 3 + 2] = 0.77;
  const RealGrid ph = select_probs(p, intra_class_thresholds(p, 0.3), 0.01);
  CHECK(ph[5 * 3 + 2] > 0.0);
  bool any1 = false;
  for (int i = 0; i < 16; ++i) any1 |= ph[i * 3 + 1] > 0.0;
  CHECK(any1);
}

TEST_CASE("all toggles off gives the plain argmax with T = 1") {
  Rng rng(8);
  const RealGrid p = fvp::test::random_probs(5, 5, 4, rng);
  SelectionConfig cfg;
  cfg.use_global = cfg.use_intra = cfg.use_prototype = false;
  const ReliableLabel label = reliable_labels(prediction(p, RealGrid(5, 5, 2)), cfg);
  for (int px = 0; px < 25; ++px) {
    int best = 0;
    for (int c = 1; c < 4; ++c)
      if (p[px * 4 + c] > p[px * 4 + best]) best = c;
    CHECK(label.y[px] == best);
    CHECK(label.mask[px] == 1);
  }
}

TEST_CASE("model-based selection composes the four operations") {
  const SegModel m = init_model(9, 4);
  const RealGrid x = fvp::test::random_real(16, 16, 1, 10);
  const SelectionConfig cfg;
  const ReliableLabel got = reliable_labels(m, x, cfg);
  const SegOutput out = predict(m, standardize(x).output);
  const RealGrid ph = select_probs(out.probs, intra_class_thresholds(out.probs, cfg.k), cfg.lambda);
  ReliableLabel chained = make_pseudo_label(ph);
  chained.mask = prototype_refine(chained, out.features, prototypes(out.features, ph));
  CHECK(got.mask == chained.mask);
  CHECK(got.y == chained.y);
}

TEST_CASE("reliable label encoding") {
  ReliableLabel label{4, LabelGrid(1, 2, 1), LabelGrid(1, 2, 1)};
  label.y[0] = 2;
  label.mask[0] = 1;
  const LabelGrid R = encode_R(label);
  CHECK(R.channels() == 5);
  const std::vector<std::uint8_t> first(R.values().begin(), R.values().begin() + 5);
  const std::vector<std::uint8_t> second(R.values().begin() + 5, R.values().end());
  CHECK(first == std::vector<std::uint8_t>{0, 0, 1, 0, 0});
  CHECK(second == std::vector<std::uint8_t>{0, 0, 0, 0, 1});

  Rng rng(11);
  const ReliableLabel random = reliable_labels(
      prediction(fvp::test::random_probs(6, 6, 3, rng), fvp::test::random_real(6, 6, 2, 12)), SelectionConfig{});
  const LabelGrid Rr = encode_R(random);
  for (int px = 0; px < 36; ++px) {
    int sum = 0;
    for (int c = 0; c < 4; ++c) sum += Rr[px * 4 + c];
    CHECK(sum == 1);
  }
}
