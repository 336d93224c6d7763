#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "texturesmith/error.hpp"
#include "texturesmith/random.hpp"
#include "texturesmith/synth.hpp"
#include "texturesmith/texture.hpp"

using namespace texturesmith;

namespace {

FeatureMatrix random_features(std::uint64_t seed, std::size_t n, std::size_t m, double lo = -1.0, double hi = 1.0) {
  SeededUniform rng(seed);
  FeatureMatrix f{n, m, std::vector<float>(n * m)};
  for (auto& v : f.values) v = static_cast<float>(rng.next(lo, hi));
  return f;
}

GramMatrix random_gram(std::uint64_t seed, std::size_t n) {
  return gram(random_features(seed, n, n + 3));
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST_SUITE("flatten") {
  TEST_CASE("2x1x2 tensor reshapes to its rows") {
    const ImageTensor t(Shape{2, 1, 2}, std::vector<float>{1, 2, 3, 4});
    const FeatureMatrix f = flatten_features(t);
    CHECK(f.n_filters == 2);
    CHECK(f.n_positions == 2);
    CHECK(f.values == std::vector<float>{1, 2, 3, 4});
  }

  TEST_CASE("1x3x3 keeps row-major order and round-trips") {
    const ImageTensor t = fixture::random_image(3, {1, 3, 3});
    const FeatureMatrix f = flatten_features(t);
    CHECK(f.n_filters == 1);
    CHECK(f.n_positions == 9);
    for (std::size_t y = 0; y < 3; ++y)
      for (std::size_t x = 0; x < 3; ++x) CHECK(f.at(0, y * 3 + x) == t.at(0, y, x));
    CHECK(unflatten_features(f, 3, 3) == t);
    const ImageTensor big = fixture::random_image(4, {5, 4, 6});
    CHECK(unflatten_features(flatten_features(big), 4, 6) == big);
    CHECK_THROWS_AS(unflatten_features(f, 2, 4), ShapeError);
  }
}

TEST_SUITE("gram") {
  TEST_CASE("small hand cases") {
    CHECK(gram(FeatureMatrix{2, 2, {1, 0, 0, 1}}).values == std::vector<float>{1, 0, 0, 1});
    CHECK(gram(FeatureMatrix{2, 2, {1, 1, 1, 1}}).values == std::vector<float>{2, 2, 2, 2});
  }

  TEST_CASE("random 3x7 matches the double-loop oracle") {
    const FeatureMatrix f = random_features(37, 3, 7);
    const GramMatrix g = gram(f);
    const auto want = oracle::gram(oracle::to_double(f.values), 3, 7);
    for (std::size_t i = 0; i < 9; ++i) CHECK(rel(g.values[i], want[i]) < 1e-6);
  }

  TEST_CASE("exact symmetry, positive semidefinite") {
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
      const std::size_t n = 1 + seed % 5, m = 1 + seed % 9;
      const GramMatrix g = gram(random_features(seed, n, m));
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) CHECK(g.at(i, j) == g.at(j, i));
      double trace = 0.0;
      for (std::size_t i = 0; i < n; ++i) trace += g.at(i, i);
      for (double ev : oracle::symmetric_eigenvalues(oracle::to_double(g.values), n)) CHECK(ev >= -1e-4 * trace);
    }
  }

  TEST_CASE("column permutation leaves the Gram matrix unchanged") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const std::size_t n = 2 + seed % 4, m = 5 + seed % 11;
      const FeatureMatrix f = random_features(seed, n, m);
      std::vector<std::size_t> perm(m);
      std::iota(perm.begin(), perm.end(), 0);
      SeededUniform rng(seed + 100);
      for (std::size_t i = m - 1; i > 0; --i) std::swap(perm[i], perm[static_cast<std::size_t>(rng.next() * (i + 1))]);
      FeatureMatrix p = f;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < m; ++k) p.at(i, k) = f.at(i, perm[k]);
      const GramMatrix a = gram(f), b = gram(p);
      for (std::size_t i = 0; i < a.values.size(); ++i) {
        CHECK(std::abs(a.values[i] - b.values[i]) <= 1e-6 * std::max(1.0f, std::abs(a.values[i])));
      }
    }
  }

  TEST_CASE("scale covariance gram(cF) == c^2 gram(F)") {
    const FeatureMatrix f = random_features(8, 4, 9);
    for (float c : {0.5f, 2.0f, -3.0f}) {
      FeatureMatrix s = f;
      for (auto& v : s.values) v *= c;
      const GramMatrix a = gram(f), b = gram(s);
      for (std::size_t i = 0; i < a.values.size(); ++i) {
        CHECK(std::abs(b.values[i] - c * c * a.values[i]) <= 1e-6 * std::max(1.0f, std::abs(b.values[i])));
      }
    }
  }
}

TEST_SUITE("layer_loss") {
  TEST_CASE("identical descriptors give zero") {
    const GramMatrix g = random_gram(1, 4);
    CHECK(layer_loss(g, g, 4, 7) == 0.0);
  }

  TEST_CASE("single-entry arithmetic") {
    CHECK(layer_loss(GramMatrix{1, {2.0f}}, GramMatrix{1, {0.0f}}, 1, 1) == 1.0);
  }

  TEST_CASE("random pairs match the summation oracle and are symmetric") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const std::size_t n = 1 + seed % 6, m = 3 + seed % 17;
      const GramMatrix g = random_gram(seed, n), q = random_gram(seed + 50, n);
      const double got = layer_loss(g, q, n, m);
      CHECK(rel(got, oracle::layer_loss(oracle::to_double(g.values), oracle::to_double(q.values), n, m)) < 1e-6);
      CHECK(got == layer_loss(q, g, n, m));
      CHECK(got >= 0.0);
    }
  }

  TEST_CASE("dimension mismatch") {
    CHECK_THROWS_AS(layer_loss(random_gram(1, 3), random_gram(2, 4), 3, 5), ShapeError);
    CHECK_THROWS_AS(layer_loss(random_gram(1, 3), random_gram(2, 3), 4, 5), ShapeError);
  }
}

TEST_SUITE("total_loss") {
  TEST_CASE("hand cases") {
    const std::vector<double> e{1.0, 2.0};
    CHECK(total_loss(e, std::vector<double>{0.0, 0.0}) == 0.0);
    CHECK(total_loss(e, std::vector<double>{0.5, 0.25}) == 1.0);
    CHECK(total_loss(std::vector<double>{0.0, 0.0}, std::vector<double>{0.3, 0.7}) == 0.0);
    CHECK_THROWS_AS(total_loss(e, std::vector<double>{1.0}), ShapeError);
  }

  TEST_CASE("random vectors match a dot product") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      SeededUniform rng(seed);
      std::vector<double> e(1 + seed % 7), w(e.size());
      for (auto& x : e) x = rng.next(0.0, 5.0);
      for (auto& x : w) x = rng.next(0.0, 1.0);
      double want = 0.0;
      for (std::size_t i = 0; i < e.size(); ++i) want += e[i] * w[i];
      CHECK(std::abs(total_loss(e, w) - want) <= 1e-12 * std::max(1.0, want));
    }
  }
}

TEST_SUITE("layer_loss_gradient") {
  TEST_CASE("zero at the minimum") {
    const FeatureMatrix f = random_features(3, 3, 5);
    const GramMatrix g = gram(f);
    for (float v : layer_loss_gradient(f, g, g).values) CHECK(v == 0.0f);
  }

  TEST_CASE("scalar case") {
    const FeatureMatrix d = layer_loss_gradient(FeatureMatrix{1, 1, {1.0f}}, GramMatrix{1, {1.0f}}, GramMatrix{1, {0.0f}});
    CHECK(d.values == std::vector<float>{1.0f});
  }

  TEST_CASE("matches central differences of layer_loss(gram(F), Q) for N <= 4, M <= 8") {
    for (std::size_t n = 1; n <= 4; ++n) {
      for (std::size_t m = 1; m <= 8; ++m) {
        const FeatureMatrix f = random_features(n * 10 + m, n, m);
        const GramMatrix q = gram(random_features(n * 10 + m + 500, n, m));
        const auto qd = oracle::to_double(q.values);
        auto objective = [&](const oracle::Tensor& t) { return oracle::layer_loss(oracle::gram(t.v, n, m), qd, n, m); };
        oracle::Tensor x(1, n, m);
        x.v = oracle::to_double(f.values);
        const auto fd = oracle::central_difference(objective, x, 1e-4);
        const FeatureMatrix got = layer_loss_gradient(f, gram(f), q);
        CHECK(oracle::relative_error(oracle::to_double(got.values), fd) < 1e-4);
      }
    }
  }

  TEST_CASE("dimension mismatch") {
    CHECK_THROWS_AS(layer_loss_gradient(random_features(1, 3, 4), random_gram(1, 3), random_gram(2, 2)), ShapeError);
  }
}

TEST_SUITE("style_descriptor") {
  TEST_CASE("zero image through a bias-free net gives zero Grams") {
    const NetworkSpec net = seeded_test_network(3, 3, 4);
    const auto layers = default_style_layers(net);
    const GramSet set = style_descriptor(net, ImageTensor(3, 8, 8), layers, uniform_layer_weights(layers.size()));
    REQUIRE(set.entries.size() == 3);
    for (const auto& e : set.entries) {
      CHECK(e.n_filters == 4);
      CHECK(e.n_positions == 64);
      CHECK(e.weight == doctest::Approx(1.0 / 3.0));
      for (float v : e.gram.values) CHECK(v == 0.0f);
    }
  }

  TEST_CASE("deterministic") {
    const NetworkSpec net = seeded_test_network(4, 2, 6);
    const ImageTensor img = fixture::random_image(5, {3, 9, 7});
    const std::vector<std::size_t> layers{1, 3};
    const std::vector<float> w{0.25f, 0.75f};
    CHECK(style_descriptor(net, img, layers, w) == style_descriptor(net, img, layers, w));
  }

  TEST_CASE("matches Grams of the oracle activations") {
    const NetworkSpec net = seeded_test_network(6, 3, 5);
    const ImageTensor img = fixture::random_image(7, {3, 8, 8});
    const std::vector<std::size_t> layers{1, 5};
    const GramSet set = style_descriptor(net, img, layers, std::vector<float>{0.5f, 0.5f});
    const auto acts = oracle::forward(net, oracle::Tensor(img));
    for (const auto& e : set.entries) {
      const auto want = oracle::gram(acts[e.layer_index]);
      CHECK(oracle::relative_error(oracle::to_double(e.gram.values), want) < 1e-5);
    }
  }

  TEST_CASE("invalid layer lists are rejected") {
    const NetworkSpec net = seeded_test_network(4, 2, 3);
    const ImageTensor img(3, 4, 4);
    CHECK_THROWS(style_descriptor(net, img, std::vector<std::size_t>{9}, std::vector<float>{1.0f}));
    CHECK_THROWS(style_descriptor(net, img, std::vector<std::size_t>{3, 1}, std::vector<float>{0.5f, 0.5f}));
    CHECK_THROWS(style_descriptor(net, img, std::vector<std::size_t>{1}, std::vector<float>{0.5f, 0.5f}));
    CHECK_THROWS(style_descriptor(net, img, std::vector<std::size_t>{1}, std::vector<float>{-1.0f}));
  }

  TEST_CASE("channel mean is subtracted before the network") {
    const NetworkSpec net = seeded_test_network(8, 1, 3);
    const ImageTensor img = fixture::random_image(9, {3, 5, 5});
    const std::vector<float> mean{0.1f, 0.2f, 0.3f};
    const ImageTensor shifted = preprocess(img, mean);
    CHECK(shifted.at(1, 2, 2) == img.at(1, 2, 2) - 0.2f);
    const std::vector<std::size_t> layers{1};
    const std::vector<float> w{1.0f};
    CHECK(style_descriptor(net, img, layers, w, mean) == style_descriptor(net, shifted, layers, w));
    CHECK_THROWS_AS(preprocess(img, std::vector<float>{0.1f}), ShapeError);
  }
}

TEST_SUITE("descriptor format") {
  TEST_CASE("round trip is bitwise exact") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const NetworkSpec net = seeded_test_network(seed, 3, 2 + seed % 4);
      const auto layers = default_style_layers(net);
      const GramSet set = style_descriptor(net, fixture::random_image(seed, {3, 6, 6}), layers,
                                           uniform_layer_weights(layers.size()));
      const auto bytes = serialize_gram_set(set);
      CHECK(load_gram_set(bytes) == set);
      CHECK(serialize_gram_set(load_gram_set(bytes)) == bytes);
    }
  }

  TEST_CASE("malformed streams") {
    const NetworkSpec net = seeded_test_network(1, 1, 2);
    auto bytes = serialize_gram_set(style_descriptor(net, ImageTensor(3, 4, 4, 0.5f), std::vector<std::size_t>{1},
                                                     std::vector<float>{1.0f}));
    auto code_of = [](const std::vector<std::uint8_t>& b) {
      try {
        load_gram_set(b);
      } catch (const FormatError& e) {
        return static_cast<int>(e.code());
      }
      return -1;
    };
    CHECK(code_of({bytes.begin(), bytes.end() - 1}) == static_cast<int>(FormatErrc::Truncated));
    auto trailing = bytes;
    trailing.push_back(1);
    CHECK(code_of(trailing) == static_cast<int>(FormatErrc::SizeMismatch));
    std::memcpy(bytes.data(), "TXSW", 4);
    CHECK(code_of(bytes) == static_cast<int>(FormatErrc::BadMagic));
  }
}

TEST_SUITE("pixel gradient") {
  TEST_CASE("2-conv-layer 1x6x6 net: every pixel matches central differences of the loss") {
    const NetworkSpec net = seeded_test_network(21, 2, 3, 1);
    const ImageTensor img = fixture::random_image(22, {1, 6, 6});
    const ImageTensor style = fixture::random_image(23, {1, 6, 6});
    const auto layers = default_style_layers(net);
    const GramSet target = style_descriptor(net, style, layers, uniform_layer_weights(layers.size()));
    const TextureEvaluation eval = evaluate_texture(img, target, net);
    const ImageTensor g = texture_gradient(eval, target, net);
    auto loss = [&](const oracle::Tensor& t) { return oracle::texture_loss(net, t, target); };
    CHECK(rel(eval.loss, loss(oracle::Tensor(img))) < 1e-5);
    const double h = std::min(1e-4, 0.25 * oracle::min_abs_relu_input(net, oracle::Tensor(img)));
    const auto fd = oracle::central_difference(loss, oracle::Tensor(img), h);
    CHECK(oracle::relative_error({g.values().begin(), g.values().end()}, fd) < 1e-3);
  }
}
