#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <vector>

#include "latent_evo/evaluate.hpp"
#include "latent_evo/generator.hpp"
#include "latent_evo/image.hpp"
#include "latent_evo/reward.hpp"
#include "latent_evo/stub.hpp"

using namespace latent_evo;
namespace fs = std::filesystem;

namespace {

const LatentShape kShape{4, 4, 4};

fs::path stub_path(StubMode mode) {
  static const char* names[] = {"ok", "fail", "malformed", "hang"};
  const auto p = fs::temp_directory_path() /
                 ("latent_evo_stub_" + std::string(names[static_cast<int>(mode)]) + ".py");
  write_stub(p.string(), mode);
  return p;
}

SubprocessGenerator stub_generator(StubMode mode, std::uint32_t w = 8, std::uint32_t h = 8,
                                   std::chrono::milliseconds timeout = std::chrono::seconds(20)) {
  return SubprocessGenerator(kShape, w, h, {stub_path(mode).string(), std::to_string(w), std::to_string(h)},
                             timeout);
}

Image random_image(std::uint32_t w, std::uint32_t h, std::uint64_t seed) {
  SeededRng rng(seed, 0);
  Image img(w, h);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

// Counts calls; fails for selected genome ids via their first coordinate.
class CountingReward final : public Reward {
 public:
  std::string name() const override { return "counting"; }
  Direction direction() const override { return Direction::Minimize; }
  bool needs_image() const override { return false; }
  double score(const Image*, const LatentTensor& z) const override {
    ++calls;
    if (z.values()[0] > 100.0) throw InvalidValue("poisoned latent");
    return z.values()[0];
  }
  mutable std::atomic<int> calls{0};
};

}  // namespace

// ---------------------------------------------------------------------------
// Toy decoder

TEST(ToyDecoder, ZeroLatentIsMidGray) {
  const ToyDecoder dec(kShape, 16, 16, 1);
  const Image img = dec.generate(LatentTensor(kShape));
  for (auto p : img.pixels) EXPECT_EQ(p, 128);
}

TEST(ToyDecoder, NegatedLatentGivesComplement) {
  const ToyDecoder dec(kShape, 16, 16, 1);
  const auto z = sample_standard_gaussian(kShape, SeededRng(3, 3));
  std::vector<double> neg(z.values().begin(), z.values().end());
  for (auto& v : neg) v = -v;
  const Image a = dec.generate(z), b = dec.generate(LatentTensor(kShape, neg));
  // 255 / (1 + e^-x) + 255 / (1 + e^x) = 255, up to rounding of each side.
  for (std::size_t i = 0; i < a.pixels.size(); ++i) EXPECT_NEAR(a.pixels[i] + b.pixels[i], 255, 1);
}

TEST(ToyDecoder, DeterministicAndSeedDependent) {
  const auto z = sample_standard_gaussian(kShape, SeededRng(3, 3));
  const ToyDecoder a(kShape, 16, 16, 1), b(kShape, 16, 16, 1), c(kShape, 16, 16, 2);
  EXPECT_EQ(a.generate(z), b.generate(z));
  EXPECT_NE(a.generate(z), c.generate(z));
}

TEST(ToyDecoder, RejectsWrongShape) {
  const ToyDecoder dec(kShape, 8, 8, 1);
  EXPECT_THROW(dec.generate(LatentTensor({4, 2, 2})), ShapeMismatch);
  EXPECT_THROW(ToyDecoder(kShape, 0, 8, 1), BadConfig);
}

TEST(ToyDecoder, BlurMakesImagesSmoother) {
  std::size_t smoother = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto z = sample_standard_gaussian(kShape, SeededRng(s, 21));
    const ToyDecoder blurred(kShape, 32, 32, s, true), sharp(kShape, 32, 32, s, false);
    smoother += reward_smoothness(blurred.generate(z)) > reward_smoothness(sharp.generate(z));
  }
  EXPECT_EQ(smoother, 100u);
}

// ---------------------------------------------------------------------------
// Subprocess generator

TEST(SubprocessGenerator, ParsesStubImage) {
  const auto gen = stub_generator(StubMode::Ok);
  const auto z = sample_standard_gaussian(kShape, SeededRng(1, 1));
  const Image img = gen.generate(z);
  EXPECT_EQ(img.width, 8u);
  EXPECT_EQ(img.height, 8u);
  // The stub maps pixel byte k to latent coordinate k mod d.
  for (std::size_t k = 0; k < img.pixels.size(); ++k) {
    const double v = z.values()[k % z.size()];
    EXPECT_NEAR(img.pixels[k], 255.0 / (1.0 + std::exp(-2.0 * v)), 0.5 + 1e-9);
  }
  EXPECT_EQ(gen.generate(z), img);
}

TEST(SubprocessGenerator, NonZeroExit) {
  const auto gen = stub_generator(StubMode::Fail);
  try {
    gen.generate(LatentTensor(kShape));
    FAIL() << "expected ChildFailed";
  } catch (const ChildFailed& e) {
    EXPECT_EQ(e.exit_code(), 3);
  }
}

TEST(SubprocessGenerator, TruncatedOutput) {
  EXPECT_THROW(stub_generator(StubMode::Malformed).generate(LatentTensor(kShape)), MalformedOutput);
}

TEST(SubprocessGenerator, WrongResolution) {
  const auto p = stub_path(StubMode::Ok);
  const SubprocessGenerator gen(kShape, 8, 8, {p.string(), "4", "4"}, std::chrono::seconds(20));
  EXPECT_THROW(gen.generate(LatentTensor(kShape)), MalformedOutput);
}

TEST(SubprocessGenerator, HangingChildTimesOut) {
  const auto gen = stub_generator(StubMode::Hang, 8, 8, std::chrono::milliseconds(1500));
  const auto start = std::chrono::steady_clock::now();
  EXPECT_THROW(gen.generate(LatentTensor(kShape)), Timeout);
  EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(10));
}

TEST(SubprocessGenerator, MissingCommand) {
  const SubprocessGenerator gen(kShape, 8, 8, {"/nonexistent/latent-evo-generator"}, std::chrono::seconds(5));
  try {
    gen.generate(LatentTensor(kShape));
    FAIL() << "expected ChildFailed";
  } catch (const ChildFailed& e) {
    EXPECT_EQ(e.exit_code(), 127);
  }
  EXPECT_THROW(SubprocessGenerator(kShape, 8, 8, {}, std::chrono::seconds(1)), BadConfig);
}

// ---------------------------------------------------------------------------
// Rewards

TEST(JpegSize, UniformGrayIsSmall) {
  const Image gray(512, 512, 128);
  const double size = reward_jpeg_size(gray);
  EXPECT_LT(size, 6000.0);
  std::ifstream golden(fs::path(LATENT_EVO_SOURCE_DIR) / "tests/golden/jpeg_uniform_gray_512.txt");
  double expected = 0.0;
  ASSERT_TRUE(golden >> expected);
  EXPECT_EQ(size, expected);
}

TEST(JpegSize, NoiseIsMuchLarger) {
  const double gray = reward_jpeg_size(Image(512, 512, 128));
  const double noise = reward_jpeg_size(random_image(512, 512, 1));
  EXPECT_GT(noise, 10.0 * gray);
}

TEST(JpegSize, DeterministicAndStartsWithSoi) {
  const Image img = random_image(64, 48, 5);
  const auto a = encode_jpeg(img), b = encode_jpeg(img);
  EXPECT_EQ(a, b);
  ASSERT_GT(a.size(), 4u);
  EXPECT_EQ(a[0], 0xFF);
  EXPECT_EQ(a[1], 0xD8);
  EXPECT_EQ(a[a.size() - 2], 0xFF);
  EXPECT_EQ(a[a.size() - 1], 0xD9);
}

TEST(JpegSize, EncodeErrors) {
  Image bad(4, 4);
  bad.pixels.pop_back();
  EXPECT_THROW(encode_jpeg(bad), EncodeFailed);
  EXPECT_THROW(encode_jpeg(Image(4, 4), 0), EncodeFailed);
}

TEST(TargetMean, Examples) {
  EXPECT_EQ(reward_target_mean(Image(4, 4, 128), {128, 128, 128}), 0.0);
  EXPECT_DOUBLE_EQ(reward_target_mean(Image(4, 4, 0), {3, 4, 0}), -5.0);
  Image img(2, 1);
  img.at(0, 0, 0) = 10;
  img.at(1, 0, 0) = 30;
  EXPECT_DOUBLE_EQ(reward_target_mean(img, {20, 0, 0}), 0.0);
}

TEST(Smoothness, Examples) {
  EXPECT_EQ(reward_smoothness(Image(8, 8, 77)), 0.0);
  Image stripes(2, 1);
  for (std::size_t c = 0; c < 3; ++c) stripes.at(1, 0, c) = 10;
  EXPECT_DOUBLE_EQ(reward_smoothness(stripes), -10.0);
  // Checkerboard: every neighbour pair differs by 255.
  Image checker(4, 4);
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x)
      for (std::size_t c = 0; c < 3; ++c) checker.at(x, y, c) = (x + y) % 2 ? 255 : 0;
  EXPECT_DOUBLE_EQ(reward_smoothness(checker), -255.0);
}

TEST(Sphere, Examples) {
  const auto t = sample_standard_gaussian(kShape, SeededRng(2, 2));
  EXPECT_EQ(reward_sphere(t, t), 0.0);
  std::vector<double> v(t.values().begin(), t.values().end());
  v[0] += 3.0;
  v[5] -= 4.0;
  EXPECT_NEAR(reward_sphere(LatentTensor(kShape, v), t), -25.0, 1e-12);
  EXPECT_THROW(reward_sphere(LatentTensor({4, 2, 2}), t), ShapeMismatch);
}

TEST(Reward, OrientationFollowsDirection) {
  EXPECT_EQ(JpegSizeReward().oriented(100.0), -100.0);
  EXPECT_EQ(SmoothnessReward().oriented(-3.0), -3.0);
  EXPECT_EQ(JpegSizeReward(75, Direction::Maximize).oriented(100.0), 100.0);
  EXPECT_FALSE(SphereProxyReward(LatentTensor(kShape)).needs_image());
  EXPECT_EQ(direction_from_string("minimize"), Direction::Minimize);
  EXPECT_THROW(direction_from_string("down"), BadConfig);
}

// ---------------------------------------------------------------------------
// Batch evaluation

TEST(BatchEvaluate, CountsAndBatches) {
  const ToyDecoder dec(kShape, 16, 16, 3);
  const TargetMeanReward reward({100, 120, 140});
  std::vector<Genome> gs;
  for (std::uint64_t i = 0; i < 24; ++i)
    gs.push_back(Genome::direct(i, sample_standard_gaussian(kShape, SeededRng(i, 4))));
  BudgetLedger ledger;
  const auto eval = batch_evaluate(gs, nullptr, &dec, reward, 8, ledger);
  EXPECT_EQ(eval.batches, 3u);
  EXPECT_EQ(ledger.reward_evaluations(), 24u);
  EXPECT_EQ(ledger.generator_calls(), 24u);
  for (std::size_t i = 0; i < 24; ++i) {
    EXPECT_EQ(eval.fitness.ids[i], i);
    EXPECT_EQ(eval.raw[i], reward_target_mean(dec.generate(gs[i].latent()), reward.target()));
  }
}

TEST(BatchEvaluate, BatchSizeDoesNotChangeResults) {
  const ToyDecoder dec(kShape, 16, 16, 3);
  const JpegSizeReward reward;
  std::vector<Genome> gs;
  for (std::uint64_t i = 0; i < 24; ++i)
    gs.push_back(Genome::direct(i, sample_standard_gaussian(kShape, SeededRng(i, 4))));
  BudgetLedger l1, l24;
  const auto a = batch_evaluate(gs, nullptr, &dec, reward, 1, l1);
  const auto b = batch_evaluate(gs, nullptr, &dec, reward, 24, l24);
  EXPECT_EQ(a.fitness, b.fitness);
  EXPECT_EQ(a.raw, b.raw);
  EXPECT_EQ(a.batches, 24u);
  EXPECT_EQ(b.batches, 1u);
  for (std::size_t i = 0; i < 24; ++i) EXPECT_EQ(a.fitness.rewards[i], -a.raw[i]);
}

TEST(BatchEvaluate, ReportsEveryFailingGenome) {
  const CountingReward reward;
  std::vector<Genome> gs;
  for (std::uint64_t i = 0; i < 6; ++i) {
    std::vector<double> v(kShape.size(), 0.0);
    v[0] = (i == 1 || i == 4) ? 1000.0 : double(i);
    gs.push_back(Genome::direct(10 + i, LatentTensor(kShape, v)));
  }
  BudgetLedger ledger;
  try {
    batch_evaluate(gs, nullptr, nullptr, reward, 4, ledger);
    FAIL() << "expected EvaluationError";
  } catch (const EvaluationError& e) {
    ASSERT_EQ(e.failures().size(), 2u);
    EXPECT_EQ(e.failures()[0].first, 11u);
    EXPECT_EQ(e.failures()[1].first, 14u);
    EXPECT_THROW(e.rethrow_first(), InvalidValue);
  }
  EXPECT_EQ(reward.calls.load(), 6);
  EXPECT_EQ(ledger.reward_evaluations(), 4u);
}

TEST(BatchEvaluate, Errors) {
  const TargetMeanReward reward({0, 0, 0});
  BudgetLedger ledger;
  const std::vector<Genome> gs{Genome::direct(0, LatentTensor(kShape))};
  EXPECT_THROW(batch_evaluate(gs, nullptr, nullptr, reward, 0, ledger), BadConfig);
  EXPECT_THROW(batch_evaluate(gs, nullptr, nullptr, reward, 1, ledger), EvaluationError);
}

// ---------------------------------------------------------------------------
// PPM

TEST(Ppm, RoundTrip) {
  const Image img = random_image(7, 5, 2);
  EXPECT_EQ(decode_ppm(encode_ppm(img)), img);
}

TEST(Ppm, AcceptsComments) {
  const std::string s = "P6\n# made by hand\n1 1\n255\n";
  std::vector<std::uint8_t> bytes(s.begin(), s.end());
  bytes.insert(bytes.end(), {1, 2, 3});
  const Image img = decode_ppm(bytes);
  EXPECT_EQ(img.pixels, (std::vector<std::uint8_t>{1, 2, 3}));
}

TEST(Ppm, RejectsMalformed) {
  auto bytes = encode_ppm(Image(2, 2, 9));
  bytes.pop_back();
  EXPECT_THROW(decode_ppm(bytes), MalformedOutput);
  const std::string p3 = "P3\n1 1\n255\n0 0 0\n";
  EXPECT_THROW(decode_ppm(std::vector<std::uint8_t>(p3.begin(), p3.end())), MalformedOutput);
  const std::string deep = "P6\n1 1\n65535\n";
  EXPECT_THROW(decode_ppm(std::vector<std::uint8_t>(deep.begin(), deep.end())), MalformedOutput);
  EXPECT_THROW(decode_ppm(std::vector<std::uint8_t>{}), MalformedOutput);
}
