#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <complex>
#include <cstdio>
#include <filesystem>

#include "compnet/io.hpp"
#include "compnet/tensor.hpp"

using namespace compnet;

TEST_CASE("hadamard identities") {
  auto z = random_tensor<float>({2, 3}, 11);
  CTensor<float> one(z.shape);
  std::fill(one.re.begin(), one.re.end(), 1.0f);
  CHECK(bit_equal(hadamard(one, z), z));

  CTensor<float> i_unit({1});
  i_unit.im[0] = 1.0f;
  auto ii = hadamard(i_unit, i_unit);
  CHECK(ii.re[0] == -1.0f);
  CHECK(ii.im[0] == 0.0f);
}

TEST_CASE("hadamard matches scalar complex multiplication") {
  auto a = random_tensor<float>({2, 3}, 1);
  auto b = random_tensor<float>({2, 3}, 2);
  auto out = hadamard(a, b);
  for (int64_t i = 0; i < a.numel(); ++i) {
    std::complex<double> expect =
        std::complex<double>(a.re[i], a.im[i]) * std::complex<double>(b.re[i], b.im[i]);
    CHECK(std::abs(out.re[i] - expect.real()) < 1e-6);
    CHECK(std::abs(out.im[i] - expect.imag()) < 1e-6);
  }
}

TEST_CASE("hadamard algebra on random inputs") {
  auto a = random_tensor<float>({4, 5}, 3);
  auto b = random_tensor<float>({4, 5}, 4);
  auto c = random_tensor<float>({4, 5}, 5);
  CHECK(max_abs_diff(hadamard(a, b), hadamard(b, a)) < 1e-6);
  CHECK(max_abs_diff(hadamard(hadamard(a, b), c), hadamard(a, hadamard(b, c))) < 1e-5);
  CHECK(max_abs_diff(hadamard(a, add(b, c)), add(hadamard(a, b), hadamard(a, c))) < 1e-5);
}

TEST_CASE("add/sub/scale") {
  auto a = random_tensor<float>({3, 4}, 7);
  CTensor<float> zero(a.shape);
  CHECK(bit_equal(add(a, zero), a));
  auto d = sub(a, a);
  for (int64_t i = 0; i < d.numel(); ++i) {
    CHECK(d.re[i] == 0.0f);
    CHECK(d.im[i] == 0.0f);
  }
  auto rot = scale(a, {0.0, 1.0});  // multiply by i: (x+iy) -> (-y+ix)
  for (int64_t i = 0; i < a.numel(); ++i) {
    CHECK(rot.re[i] == -a.im[i]);
    CHECK(rot.im[i] == a.re[i]);
  }
  CHECK_THROWS_AS(add(a, random_tensor<float>({2, 4}, 1)), ShapeError);
}

TEST_CASE("concat then slice recovers parts bit-exactly") {
  auto a = random_tensor<float>({2, 2, 3, 4}, 21);
  auto b = random_tensor<float>({2, 3, 3, 4}, 22);
  auto cat = concat_channels<float>({a, b});
  CHECK(cat.shape == std::vector<int64_t>{2, 5, 3, 4});
  CHECK(bit_equal(slice_channels(cat, 0, 2), a));
  CHECK(bit_equal(slice_channels(cat, 2, 5), b));

  auto single = concat_channels<float>({a});
  CHECK(bit_equal(single, a));

  CHECK_THROWS_AS(concat_channels<float>(std::vector<CTensor<float>>{}), ShapeError);
  CHECK_THROWS_AS(concat_channels<float>({a, random_tensor<float>({2, 1, 5, 4}, 9)}),
                  ShapeError);
}

TEST_CASE("seeded_init determinism and schemes") {
  auto z = seeded_init<float>({4, 4}, InitScheme::kZeros, 5);
  for (auto v : z.re) CHECK(v == 0.0f);
  for (auto v : z.im) CHECK(v == 0.0f);

  auto a = seeded_init<float>({8, 4, 3, 3}, InitScheme::kUniformFanScaled, 42);
  auto b = seeded_init<float>({8, 4, 3, 3}, InitScheme::kUniformFanScaled, 42);
  CHECK(bit_equal(a, b));
  auto c = seeded_init<float>({8, 4, 3, 3}, InitScheme::kUniformFanScaled, 43);
  CHECK(!bit_equal(a, c));
}

TEST_CASE("fan-scaled init variance") {
  // 1000-element sample: empirical variance within 20% of b^2/3
  auto t = seeded_init<float>({10, 10, 5, 1}, InitScheme::kUniformFanScaled, 77);
  auto [fi, fo] = fan_in_out(t.shape);
  double expect = 1.0 / static_cast<double>(fi + fo);  // b^2/3
  double mean = 0;
  for (auto v : t.re) mean += v;
  mean /= t.numel();
  double var = 0;
  for (auto v : t.re) var += (v - mean) * (v - mean);
  var /= t.numel();
  CHECK(var > 0.8 * expect);
  CHECK(var < 1.2 * expect);
}

TEST_CASE("CTEN roundtrip is bit-exact") {
  auto t = random_tensor<float>({2, 3, 4, 5}, 99);
  auto path = std::filesystem::temp_directory_path() / "compnet_test.cten";
  write_cten(path.string(), t);
  auto back = read_cten<float>(path.string());
  CHECK(bit_equal(t, back));
  std::filesystem::remove(path);
}

TEST_CASE("CTEN truncation reports byte offset") {
  auto t = random_tensor<float>({2, 2}, 1);
  std::vector<uint8_t> buf;
  encode_cten(buf, t);
  buf.resize(buf.size() - 5);
  bytes::Reader r(buf, "trunc.cten");
  bool threw = false;
  try {
    decode_cten<float>(r);
  } catch (const DataError& e) {
    threw = true;
    CHECK(std::string(e.what()).find("byte offset") != std::string::npos);
  }
  CHECK(threw);
}

TEST_CASE("CTEN bad magic") {
  std::vector<uint8_t> buf = {'X', 'X', 'X', 'X', '1', 0, 1};
  bytes::Reader r(buf, "bad.cten");
  CHECK_THROWS_AS(decode_cten<float>(r), DataError);
}

TEST_CASE("checkpoint roundtrip with header") {
  Checkpoint ck;
  ck.header = "model.channels = 16\nstep = 3\n";
  ck.tensors.emplace_back("w1", random_tensor<float>({2, 2, 3, 3}, 7));
  ck.tensors.emplace_back("b1", random_tensor<float>({2}, 8));
  auto path = std::filesystem::temp_directory_path() / "compnet_test.ckpt";
  write_checkpoint(path.string(), ck);
  auto back = read_checkpoint(path.string());
  CHECK(back.header == ck.header);
  REQUIRE(back.tensors.size() == 2);
  CHECK(back.tensors[0].first == "w1");
  CHECK(bit_equal(back.tensors[0].second, ck.tensors[0].second));
  CHECK(bit_equal(back.tensors[1].second, ck.tensors[1].second));
  std::filesystem::remove(path);
}

TEST_CASE("PPM write/read quantization roundtrip") {
  CTensor<float> img({3, 4, 6});
  Rng rng(5);
  for (auto& v : img.re)
    v = static_cast<float>(rng.uniform_int(256)) / 255.0f;  // exact u8 grid
  auto path = std::filesystem::temp_directory_path() / "compnet_test.ppm";
  write_ppm(path.string(), img);
  auto back = read_ppm<float>(path.string());
  CHECK(max_abs_diff(img, back) == 0.0);
  std::filesystem::remove(path);
}
