#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "megsim/core.hpp"

using namespace megsim;

TEST_CASE("tensor construction validates shape and values") {
  const FeatureTensor t = make_tensor({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.size() == 6);
  CHECK(t.role == TensorRole::seed);
  CHECK_THROWS_AS(make_tensor({}, {}), ShapeError);
  CHECK_THROWS_AS(make_tensor({2, 2}, {1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(make_tensor({1}, {std::numeric_limits<double>::infinity()}), ValueError);
  CHECK_THROWS_AS(make_tensor({1}, {std::nan("")}), ValueError);
}

TEST_CASE("shape_elements and zero-size tensors") {
  CHECK(shape_elements(std::vector<std::size_t>{}) == 0);
  CHECK(shape_elements(std::vector<std::size_t>{2, 3, 4}) == 24);
  CHECK(shape_elements(std::vector<std::size_t>{0, 5}) == 0);
  const FeatureTensor empty = make_tensor({0, 5}, {});
  CHECK(empty.size() == 0);
  CHECK(mse(empty, empty) == 0.0);
}

TEST_CASE("reshape keeps values and checks volume") {
  FeatureTensor t = make_tensor({2, 3}, {1, 2, 3, 4, 5, 6});
  const FeatureTensor r = reshape(t, {6});
  CHECK(r.shape == std::vector<std::size_t>{6});
  CHECK(r.values == t.values);
  CHECK_THROWS_AS(reshape(t, {4}), ShapeError);
  CHECK_THROWS_AS(reshape(t, {}), ShapeError);
}

// Frozen against an independent reimplementation of the mixing chain
// (splitmix64 finalizer + FNV-1a labels).
TEST_CASE("rng golden sequence") {
  Rng r(root_stream(42));
  CHECK(r.next_u64() == 0x3c4602a84b6afa20ull);
  CHECK(r.next_u64() == 0xc361dc9b58af486full);
  CHECK(r.next_u64() == 0xc84429380f8937efull);

  const RngStream sub = substream(root_stream(42), "snr:10/rep:0");
  CHECK(sub.seed == 42);
  CHECK(sub.stream == 0x92966c609d929577ull);
  Rng r2(sub);
  CHECK(r2.next_u64() == 0x70e0aaca48937f81ull);
  CHECK(r2.next_u64() == 0x6bae7048749f982eull);

  Rng r3(sub);
  CHECK(r3.next_unit() == 0.44092814863740937);
  CHECK(r3.next_unit() == 0.42063047188696456);

  CHECK(substream(sub, "dl").stream == 0xc9b86e73494a9211ull);
}

TEST_CASE("substreams are label-distinct and reproducible") {
  const RngStream root = root_stream(7);
  std::set<std::uint64_t> ids;
  for (const char* label : {"ul", "dl", "boundary", "es", "ue", "calibration"})
    ids.insert(substream(root, label).stream);
  CHECK(ids.size() == 6);
  CHECK(substream(root, "ul").stream == substream(root, "ul").stream);
  // The stream id selects a sequence under a seed; equal labels give equal
  // ids across seeds, and the seeds diverge at the generator instead.
  CHECK(substream(root_stream(8), "ul").stream == substream(root, "ul").stream);
  CHECK(substream(root_stream(8), "ul").seed != substream(root, "ul").seed);
  CHECK(Rng(substream(root, "ul")).next_u64() !=
        Rng(substream(root_stream(8), "ul")).next_u64());
}

TEST_CASE("next_unit stays in [0, 1)") {
  Rng r(substream(root_stream(1), "unit"));
  for (int i = 0; i < 10000; ++i) {
    const double u = r.next_unit();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("gaussian tensor moments and determinism") {
  const RngStream s = substream(root_stream(3), "gauss");
  const FeatureTensor a = gaussian_tensor({256, 256}, s);
  const FeatureTensor b = gaussian_tensor({256, 256}, s);
  CHECK(a.values == b.values);  // same stream, same tensor

  double mean = 0.0, sq = 0.0;
  for (double v : a.values) {
    mean += v;
    sq += v * v;
  }
  mean /= static_cast<double>(a.size());
  sq /= static_cast<double>(a.size());
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(sq - mean * mean - 1.0) < 0.05);

  CHECK_THROWS_AS(gaussian_tensor(std::span<const std::size_t>(), s), ShapeError);
  CHECK_THROWS_AS(gaussian_tensor({4, 0}, s), ShapeError);
}

TEST_CASE("normal sequence is stream-deterministic including the cached spare") {
  Rng a(substream(root_stream(9), "n"));
  Rng b(substream(root_stream(9), "n"));
  for (int i = 0; i < 101; ++i) REQUIRE(a.next_normal() == b.next_normal());
}

TEST_CASE("mse basics") {
  const FeatureTensor a = make_tensor({3}, {1.0, 2.0, 3.0});
  const FeatureTensor b = make_tensor({3}, {1.0, 2.5, 2.0});
  CHECK(mse(a, a) == 0.0);
  CHECK(mse(a, b) == Catch::Approx((0.25 + 1.0) / 3.0).epsilon(1e-15));
  const FeatureTensor c = make_tensor({1, 3}, {1.0, 2.0, 3.0});
  CHECK_THROWS_AS(mse(a, c), ShapeError);
}

TEST_CASE("psnr formula, cap, and validation") {
  const FeatureTensor a = make_tensor({2}, {0.0, 0.0});
  const FeatureTensor b = make_tensor({2}, {0.1, 0.1});
  CHECK(psnr(a, a) == kPsnrCapDb);
  CHECK(psnr(a, b) == Catch::Approx(10.0 * std::log10(1.0 / 0.01)).epsilon(1e-12));
  CHECK(psnr(a, b, 2.0) == Catch::Approx(10.0 * std::log10(4.0 / 0.01)).epsilon(1e-12));
  CHECK_THROWS_AS(psnr(a, b, 0.0), ValueError);
  CHECK_THROWS_AS(psnr(a, b, -1.0), ValueError);
}

TEST_CASE("distortion report carries mse, psnr, and max error") {
  const FeatureTensor ref = make_tensor({4}, {0.0, 1.0, 2.0, 3.0});
  const FeatureTensor got = make_tensor({4}, {0.0, 1.5, 2.0, 2.9});
  const DistortionReport rep = distortion_report(ref, got);
  CHECK(rep.mse == Catch::Approx((0.25 + 0.01) / 4.0).epsilon(1e-12));
  CHECK(rep.per_dim_max_err == Catch::Approx(0.5).epsilon(1e-12));
  CHECK(rep.psnr_db == Catch::Approx(10.0 * std::log10(1.0 / rep.mse)).epsilon(1e-12));
}

TEST_CASE("config errors carry their field path") {
  try {
    throw ConfigError("channels.ul.rate_bps", "must be positive");
  } catch (const ConfigError& e) {
    CHECK(e.path() == "channels.ul.rate_bps");
    CHECK(std::string(e.what()) == "channels.ul.rate_bps: must be positive");
  }
}
