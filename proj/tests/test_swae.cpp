#include <gtest/gtest.h>

#include <filesystem>

#include "digcsi/channel/dataset.hpp"
#include "digcsi/swae/generator.hpp"
#include "digcsi/swae/train.hpp"
#include "oracles.hpp"

using namespace digcsi;
using namespace digcsi::swae;
using numeric::Rng;
using numeric::Tensor;

namespace {

Tensor<double> column(const std::vector<double>& v) { return Tensor<double>({v.size(), 1}, v); }

Tensor<double> random_points(std::size_t m, std::size_t d, Rng& rng) {
  Tensor<double> t({m, d});
  for (double& v : t.data()) v = rng.normal();
  return t;
}

SwaeArchitecture tiny_architecture() {
  SwaeArchitecture a;
  a.height = 4;
  a.width = 4;
  a.encoder_widths = {3, 4};
  a.decoder_tail = 2;
  a.zdim = 4;
  return a;
}

Tensor<double> flatten_grads(const std::vector<const numeric::ParameterSet<double>*>& sets) {
  std::vector<double> out;
  for (const auto* s : sets)
    for (const auto& e : s->entries()) out.insert(out.end(), e.grad.data().begin(), e.grad.data().end());
  const std::size_t n = out.size();
  return Tensor<double>({n}, std::move(out));
}

channel::LocalDataset toy_dataset(double walk_m, std::uint32_t ue = 0) {
  channel::ScenarioConfig c;
  c.walk_length_m = walk_m;
  c.ue_count = ue + 1;
  return channel::build_local_dataset(channel::place_ue(c, ue), c);
}

double mean_energy(const Tensor<float>& t) {
  double s = 0;
  for (float v : t.data()) s += static_cast<double>(v) * v;
  return s / static_cast<double>(t.size());
}

}  // namespace

// --- architecture ---------------------------------------------------------

TEST(SwaeArchitecture, DecoderCountFormulaHoldsForEveryZdim) {
  for (std::size_t zdim : {10u, 20u, 40u, 100u, 400u, 800u, 2000u}) {
    SwaeArchitecture arch;
    arch.zdim = zdim;
    const std::size_t expected = 1024 * zdim + 1024 + 392'210;
    EXPECT_EQ(decoder_parameter_count(arch), expected) << zdim;
    EXPECT_EQ(build_decoder<float>(arch, 1).params.total_scalar_count(), expected) << zdim;
  }
}

TEST(SwaeArchitecture, EncoderCountMatchesBuiltNetwork) {
  SwaeArchitecture arch;
  EXPECT_EQ(build_encoder<float>(arch, 1).params.total_scalar_count(), encoder_parameter_count(arch));
}

TEST(SwaeArchitecture, RoundTripPreservesShape) {
  SwaeArchitecture arch;
  auto enc = build_encoder<float>(arch, 3);
  auto dec = build_decoder<float>(arch, 3);
  Tensor<float> x({2, 2, 32, 32}, 0.5f);
  const auto s = enc.forward(x);
  EXPECT_EQ(s.shape(), (numeric::Shape{2, 100}));
  EXPECT_EQ(dec.forward(s).shape(), x.shape());
}

TEST(SwaeArchitecture, IndivisibleExtentIsConfigError) {
  SwaeArchitecture arch;
  arch.height = 24;
  EXPECT_THROW(arch.validate(), ConfigError);
}

TEST(SwaeArchitecture, RandomInitForwardIsFinite) {
  SwaeArchitecture arch;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto enc = build_encoder<float>(arch, seed);
    auto dec = build_decoder<float>(arch, seed);
    Rng rng(seed);
    Tensor<float> x({1, 2, 32, 32});
    for (float& v : x.data()) v = static_cast<float>(rng.uniform(-1, 1));
    const auto y = dec.forward(enc.forward(x));
    ASSERT_TRUE(y.all_finite()) << "seed " << seed;
  }
}

TEST(SwaeArchitecture, SameSeedGivesBitIdenticalOutputs) {
  SwaeArchitecture arch;
  Tensor<float> x({2, 2, 32, 32});
  Rng rng(1);
  for (float& v : x.data()) v = static_cast<float>(rng.uniform(-1, 1));
  auto a = build_encoder<float>(arch, 9), b = build_encoder<float>(arch, 9);
  auto da = build_decoder<float>(arch, 9), db = build_decoder<float>(arch, 9);
  EXPECT_EQ(da.forward(a.forward(x)), db.forward(b.forward(x)));
  EXPECT_FALSE(build_encoder<float>(arch, 10).params.same_values(a.params));
}

// --- directions -----------------------------------------------------------

TEST(Directions, OneDimensionalDirectionsAreSigns) {
  Rng rng(2);
  const auto d = sample_directions<double>(1, 200, rng);
  for (double v : d.data()) EXPECT_TRUE(v == 1.0 || v == -1.0);
}

TEST(Directions, UnitNorm) {
  Rng rng(3);
  for (std::size_t zdim : {2u, 7u, 100u}) {
    const auto d = sample_directions<float>(zdim, 50, rng);
    for (std::size_t l = 0; l < 50; ++l) {
      double n = 0;
      for (std::size_t k = 0; k < zdim; ++k) n += static_cast<double>(d[l * zdim + k]) * d[l * zdim + k];
      EXPECT_NEAR(std::sqrt(n), 1.0, 1e-6);
    }
  }
}

TEST(Directions, SphereSymmetricMean) {
  Rng rng(4);
  const auto d = sample_directions<double>(3, 100000, rng);
  for (std::size_t k = 0; k < 3; ++k) {
    double sum = 0;
    for (std::size_t l = 0; l < 100000; ++l) sum += d[l * 3 + k];
    EXPECT_LT(std::abs(sum / 100000), 0.02);
  }
}

// --- sliced Wasserstein ---------------------------------------------------

TEST(Swd, IdenticalSetsGiveZero) {
  Rng rng(5);
  const auto s = random_points(16, 5, rng);
  const SwdBatch<double> b{s, s, sample_directions<double>(5, 10, rng)};
  for (auto c : {GroundCost::squared_l2, GroundCost::l1}) EXPECT_EQ(sliced_wasserstein(b, c).value, 0.0);
}

TEST(Swd, HandComputedOneDimensionalCase) {
  const SwdBatch<double> b{column({0, 2}), column({1, 3}), column({1})};
  EXPECT_DOUBLE_EQ(oracle::exact_matching_cost({0, 2}, {1, 3}, true), 1.0);
  EXPECT_DOUBLE_EQ(sliced_wasserstein(b, GroundCost::squared_l2).value, 1.0);
}

TEST(Swd, BatchOrderDoesNotChangeValue) {
  Rng rng(6);
  const auto s = random_points(12, 4, rng), z = random_points(12, 4, rng);
  const auto dirs = sample_directions<double>(4, 8, rng);
  Tensor<double> shuffled(s.shape());
  std::vector<std::size_t> perm(12);
  std::iota(perm.begin(), perm.end(), 0u);
  channel::fisher_yates(perm, rng);
  for (std::size_t i = 0; i < 12; ++i)
    for (std::size_t k = 0; k < 4; ++k) shuffled[i * 4 + k] = s[perm[i] * 4 + k];
  for (auto c : {GroundCost::squared_l2, GroundCost::l1}) {
    EXPECT_EQ(sliced_wasserstein(SwdBatch<double>{s, z, dirs}, c).value,
              sliced_wasserstein(SwdBatch<double>{shuffled, z, dirs}, c).value);
  }
}

TEST(Swd, OneDimensionalEstimatorIsExactWasserstein) {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 1 + rng.below(40);
    std::vector<double> a(m), b(m);
    for (auto& v : a) v = rng.normal() * 3;
    for (auto& v : b) v = rng.uniform(-2, 5);
    const SwdBatch<double> batch{column(a), column(b), column({1.0})};
    EXPECT_NEAR(sliced_wasserstein(batch, GroundCost::l1).value, oracle::wasserstein1_cdf(a, b), 1e-9);
    if (m <= 7) {
      for (bool squared : {true, false}) {
        EXPECT_NEAR(sliced_wasserstein(batch, squared ? GroundCost::squared_l2 : GroundCost::l1).value,
                    oracle::exact_matching_cost(a, b, squared), 1e-9);
      }
    }
  }
}

TEST(Swd, SymmetricAndNonNegative) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = random_points(9, 3, rng), z = random_points(9, 3, rng);
    const auto dirs = sample_directions<double>(3, 6, rng);
    for (auto c : {GroundCost::squared_l2, GroundCost::l1}) {
      const double forward = sliced_wasserstein(SwdBatch<double>{s, z, dirs}, c).value;
      const double reverse = sliced_wasserstein(SwdBatch<double>{z, s, dirs}, c).value;
      EXPECT_GT(forward, 0.0);
      EXPECT_NEAR(forward, reverse, 1e-12);
    }
  }
}

TEST(Swd, EmptyBatchIsArgumentError) {
  const SwdBatch<double> b{Tensor<double>({0, 2}), Tensor<double>({0, 2}), Tensor<double>({1, 2}, {1, 0})};
  EXPECT_THROW(sliced_wasserstein(b, GroundCost::squared_l2), ArgumentError);
}

TEST(Swd, MismatchedBatchesAreRejected) {
  const SwdBatch<double> b{Tensor<double>({3, 2}), Tensor<double>({4, 2}), Tensor<double>({1, 2}, {1, 0})};
  EXPECT_ANY_THROW(sliced_wasserstein(b, GroundCost::squared_l2));
}

TEST(Swd, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(600 + seed);
    const auto s = random_points(6, 3, rng), z = random_points(6, 3, rng);
    const auto dirs = sample_directions<double>(3, 4, rng);
    for (auto c : {GroundCost::squared_l2, GroundCost::l1}) {
      const auto g = sliced_wasserstein(SwdBatch<double>{s, z, dirs}, c).grad_latent;
      const auto n = oracle::numeric_gradient(
          s, [&](const Tensor<double>& v) { return sliced_wasserstein(SwdBatch<double>{v, z, dirs}, c).value; });
      EXPECT_LT(oracle::relative_error(g, n), 1e-4) << "seed " << seed;
    }
  }
}

// --- whole-graph gradient -------------------------------------------------

TEST(LocalObjective, WholeGraphGradientMatchesFiniteDifferences) {
  const auto arch = tiny_architecture();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(700 + seed);
    LocalModel<double> model{build_encoder<double>(arch, seed), build_decoder<double>(arch, seed), {}, 0};
    Tensor<double> x({5, 2, 4, 4});
    for (double& v : x.data()) v = rng.uniform(-1, 1);
    const auto z = random_points(5, arch.zdim, rng);
    const auto dirs = sample_directions<double>(arch.zdim, 3, rng);
    LocalTrainingConfig cfg;
    cfg.swd.weight = 0.5;
    // alternate the reduction so both scalings are covered
    cfg.reduction = seed % 2 == 0 ? Reduction::per_sample : Reduction::per_scalar;

    accumulate_local_gradients(model, x, z, dirs, cfg);
    const auto analytic = flatten_grads({&model.encoder.params, &model.decoder.params});

    auto loss_at = [&](const LocalModel<double>& m) {
      auto copy = m;
      return accumulate_local_gradients(copy, x, z, dirs, cfg).total(cfg.swd.weight);
    };
    std::vector<double> numeric;
    for (auto* net : {&model.encoder, &model.decoder}) {
      for (std::size_t e = 0; e < net->params.size(); ++e) {
        auto& value = net->params[e].value;
        for (std::size_t i = 0; i < value.size(); ++i) {
          const double keep = value[i];
          value[i] = keep + 1e-6;
          const double up = loss_at(model);
          value[i] = keep - 1e-6;
          const double down = loss_at(model);
          value[i] = keep;
          numeric.push_back((up - down) / 2e-6);
        }
      }
    }
    const Tensor<double> fd({numeric.size()}, numeric);
    EXPECT_LT(oracle::relative_error(analytic, fd), 1e-3) << "seed " << seed;
  }
}

TEST(ReconstructionCost, HandExampleForBothCostsAndReductions) {
  // two samples of 2 scalars, residuals {1, -2} and {0, 3}
  const Tensor<double> x({2, 2}, {0, 0, 0, 0});
  const Tensor<double> y({2, 2}, {1, -2, 0, 3});
  EXPECT_DOUBLE_EQ(reconstruction_cost(y, x, GroundCost::squared_l2, Reduction::per_sample).first, 7.0);
  EXPECT_DOUBLE_EQ(reconstruction_cost(y, x, GroundCost::squared_l2, Reduction::per_scalar).first, 3.5);
  EXPECT_DOUBLE_EQ(reconstruction_cost(y, x, GroundCost::l1, Reduction::per_sample).first, 3.0);
  EXPECT_DOUBLE_EQ(reconstruction_cost(y, x, GroundCost::l1, Reduction::per_scalar).first, 1.5);
  const auto g = reconstruction_cost(y, x, GroundCost::squared_l2, Reduction::per_scalar).second;
  const auto ref = numeric::mse_grad(y, x);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_DOUBLE_EQ(g[i], ref[i]);
  EXPECT_THROW(reconstruction_cost(y, Tensor<double>({1, 4}), GroundCost::l1, Reduction::per_sample), ShapeError);
}

TEST(ReconstructionCost, GradientMatchesFiniteDifferences) {
  for (auto cost : {GroundCost::squared_l2, GroundCost::l1}) {
    for (auto red : {Reduction::per_sample, Reduction::per_scalar}) {
      Rng rng(77);
      Tensor<double> x({3, 5}), y({3, 5});
      for (double& v : x.data()) v = rng.uniform(-1, 1);
      for (double& v : y.data()) v = rng.uniform(-1, 1);
      const auto g = reconstruction_cost(y, x, cost, red).second;
      const auto n = oracle::numeric_gradient(
          y, [&](const Tensor<double>& v) { return reconstruction_cost(v, x, cost, red).first; });
      EXPECT_LT(oracle::relative_error(g, n), 1e-6) << ground_cost_name(cost) << " " << reduction_name(red);
    }
  }
  EXPECT_EQ(parse_reduction("per_sample"), Reduction::per_sample);
  EXPECT_THROW(parse_reduction("sum"), ConfigError);
}

// --- training -------------------------------------------------------------

TEST(TrainLocal, ZeroEpochsKeepsInitialisation) {
  const auto ds = toy_dataset(0.5);
  SwaeArchitecture arch;
  LocalTrainingConfig cfg;
  cfg.epochs = 0;
  const auto m = train_local<float>(ds, arch, cfg, 21);
  EXPECT_TRUE(m.log.empty());
  EXPECT_TRUE(m.encoder.params.same_values(build_encoder<float>(arch, 21).params));
  EXPECT_TRUE(m.decoder.params.same_values(build_decoder<float>(arch, 21).params));
}

TEST(TrainLocal, RejectsOversizedBatch) {
  const auto ds = toy_dataset(0.2);
  LocalTrainingConfig cfg;
  cfg.batch_size = 64;
  EXPECT_THROW(train_local<float>(ds, SwaeArchitecture{}, cfg, 1), ArgumentError);
}

TEST(TrainLocal, NonFiniteLossRaisesDivergenceWithCheckpoint) {
  auto ds = toy_dataset(0.5);
  ds.samples[0] = std::numeric_limits<float>::quiet_NaN();
  for (auto& v : ds.samples.data()) v = std::numeric_limits<float>::quiet_NaN();
  SwaeArchitecture arch;
  LocalTrainingConfig cfg;
  cfg.epochs = 1;
  try {
    train_local<float>(ds, arch, cfg, 5);
    FAIL() << "expected divergence";
  } catch (const TrainingDiverged<float>& e) {
    ASSERT_EQ(e.checkpoint().size(), 2u);
    EXPECT_TRUE(e.checkpoint()[1].same_values(build_decoder<float>(arch, 5).params));
  }
}

class TrainedToy : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    data_ = new channel::LocalDataset(toy_dataset(2.0));
    LocalTrainingConfig cfg;
    cfg.epochs = 50;
    // with the per-sample reconstruction sum, weight 1 leaves the latents far
    // from the prior and prior draws decode off the data
    cfg.swd.weight = 100;
    model_ = new LocalModel<float>(train_local<float>(*data_, arch_, cfg, 31));
  }
  static void TearDownTestSuite() {
    delete model_;
    delete data_;
  }
  static inline const SwaeArchitecture arch_{};
  static inline channel::LocalDataset* data_ = nullptr;
  static inline LocalModel<float>* model_ = nullptr;
};

TEST_F(TrainedToy, ReconstructionDropsBelowQuarterOfFirstEpoch) {
  ASSERT_EQ(data_->count(), 200u);
  ASSERT_EQ(model_->log.size(), 50u);
  // both per-scalar MSE
  EXPECT_LT(model_->final_reconstruction, 0.25 * model_->log.front().mse)
      << "epoch 1 " << model_->log.front().mse << " final " << model_->final_reconstruction;
}

TEST_F(TrainedToy, LatentsMoveTowardsThePrior) {
  const std::vector<std::size_t> idx(data_->train.begin(), data_->train.begin() + 32);
  const auto x = numeric::gather_batch<float>(data_->samples, idx);
  Rng rng(77);
  const auto z = numeric::standard_normal<float>({32, arch_.zdim}, rng);
  const auto dirs = sample_directions<float>(arch_.zdim, 50, rng);
  auto untrained = build_encoder<float>(arch_, 31);
  const double before = sliced_wasserstein(SwdBatch<float>{untrained.forward(x), z, dirs}, GroundCost::squared_l2).value;
  const double after = sliced_wasserstein(SwdBatch<float>{model_->encoder.forward(x), z, dirs}, GroundCost::squared_l2).value;
  EXPECT_LT(after, before);
}

TEST_F(TrainedToy, GeneratedEnergyIsCloseToRealData) {
  auto gen = make_generator(model_->decoder, arch_, 0, data_->norm_scale);
  const auto fake = generate(gen, 500, 3);
  const auto real = channel::gather(data_->samples, data_->train);
  const double e_fake = mean_energy(fake);
  const double e_real = mean_energy(real);
  EXPECT_GT(e_fake, 0.5 * e_real);
  EXPECT_LT(e_fake, 2.0 * e_real);
}

// --- generators -----------------------------------------------------------

TEST(Generator, ByteCountsMatchClosedForm) {
  for (auto [zdim, bytes] : std::vector<std::pair<std::size_t, std::uint64_t>>{{400, 3'211'336}, {10, 1'613'896}}) {
    SwaeArchitecture arch;
    arch.zdim = zdim;
    const auto g = make_generator(build_decoder<float>(arch, 1), arch, 0, 1.0);
    EXPECT_EQ(g.total_bytes(), bytes);
    EXPECT_EQ(g.total_bytes(), 4 * decoder_parameter_count(arch));
  }
}

TEST(Generator, ExportRoundTripIsBitIdentical) {
  const auto dir = std::filesystem::temp_directory_path() / "digcsi_generator";
  std::filesystem::remove_all(dir);
  SwaeArchitecture arch;
  arch.zdim = 10;
  const auto g = make_generator(build_decoder<float>(arch, 4), arch, 17, 0.125);
  EXPECT_EQ(export_generator(dir / "ue_0017", g), 1'613'896u);
  EXPECT_EQ(std::filesystem::file_size(numeric::blob_path(dir / "ue_0017")), 1'613'896u);
  const auto manifest = numeric::read_manifest(dir / "ue_0017");
  EXPECT_EQ(manifest["ue_id"], 17);
  EXPECT_EQ(manifest["zdim"], 10);
  EXPECT_EQ(manifest["architecture_id"], "swae-v1");
  EXPECT_EQ(manifest["total_bytes"], 1'613'896);
  const auto back = read_generator<float>(dir / "ue_0017");
  EXPECT_EQ(back.ue_id, 17u);
  EXPECT_EQ(back.norm_scale, 0.125);
  EXPECT_EQ(back.zdim(), 10u);
  EXPECT_TRUE(back.decoder.params.same_values(g.decoder.params));
  std::filesystem::remove_all(dir);
}

TEST(Generator, SamplingIsDeterministicAndBounded) {
  SwaeArchitecture arch;
  auto g = make_generator(build_decoder<float>(arch, 6), arch, 0, 1.0);
  EXPECT_EQ(generate(g, 1, 42), generate(g, 1, 42));
  EXPECT_NE(generate(g, 1, 42), generate(g, 1, 43));
  const auto many = generate(g, 100, 1);
  EXPECT_EQ(many.shape(), (numeric::Shape{100, 2, 32, 32}));
  for (float v : many.data()) ASSERT_LE(std::abs(v), 1.0f);
  EXPECT_THROW(generate(g, 0, 1), ArgumentError);
}

TEST(Generator, MismatchedDecoderIsRejected) {
  SwaeArchitecture a, b;
  b.zdim = 20;
  EXPECT_THROW(make_generator(build_decoder<float>(a, 1), b, 0, 1.0), ShapeError);
}
