#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "digcsi/channel/dataset_io.hpp"
#include "digcsi/channel/dft.hpp"
#include "oracles.hpp"

using namespace digcsi;
using namespace digcsi::channel;

namespace {

ScenarioConfig short_walk(double length_m, std::uint32_t ues = 1) {
  ScenarioConfig c;
  c.walk_length_m = length_m;
  c.ue_count = ues;
  return c;
}

ComplexMatrix random_complex(std::size_t r, std::size_t c, numeric::Rng& rng) {
  ComplexMatrix m(r, c);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = {rng.normal(), rng.normal()};
  return m;
}

bool same_bytes(const LocalDataset& a, const LocalDataset& b) { return encode_dataset(a) == encode_dataset(b); }

}  // namespace

// --- scenario -------------------------------------------------------------

TEST(Scenario, DefaultsGiveTenThousandSnapshots) {
  ScenarioConfig c;
  EXPECT_EQ(c.snapshot_count(), 10000u);
  EXPECT_NO_THROW(c.validate());
}

TEST(Scenario, OversizedWalkBoxIsConfigError) {
  ScenarioConfig c;
  c.walk_box_edge_m = 150;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(place_ues(c), ConfigError);
}

TEST(PlaceUes, DeterministicForSingleUe) {
  auto c = short_walk(1.0);
  c.seed = 77;
  const auto a = place_ues(c), b = place_ues(c);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].center.x, b[0].center.x);
  EXPECT_EQ(a[0].center.y, b[0].center.y);
  ASSERT_EQ(a[0].scatterers.size(), b[0].scatterers.size());
  for (std::size_t i = 0; i < a[0].scatterers.size(); ++i) {
    EXPECT_EQ(a[0].scatterers[i].position.x, b[0].scatterers[i].position.x);
    EXPECT_EQ(a[0].scatterers[i].phase, b[0].scatterers[i].phase);
  }
}

TEST(PlaceUes, HundredDistinctUesWithBoxesInsideCell) {
  ScenarioConfig c;
  const auto ues = place_ues(c);
  ASSERT_EQ(ues.size(), 100u);
  std::set<std::uint32_t> ids;
  const double half_cell = c.cell_edge_m / 2, half_box = c.walk_box_edge_m / 2;
  for (const auto& u : ues) {
    ids.insert(u.ue_id);
    EXPECT_LE(std::abs(u.center.x) + half_box, half_cell);
    EXPECT_LE(std::abs(u.center.y) + half_box, half_cell);
    ASSERT_EQ(u.scatterers.size(), c.cluster_count);
    for (const auto& s : u.scatterers) {
      const double r = std::hypot(s.position.x, s.position.y);
      EXPECT_GE(r, c.scatterer_min_radius_m);
      EXPECT_LE(r, c.scatterer_max_radius_m);
    }
  }
  EXPECT_EQ(ids.size(), 100u);
}

TEST(PlaceUes, CentresAreUniformOverTheCell) {
  ScenarioConfig c;
  double sx = 0, sy = 0;
  std::size_t n = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    c.seed = seed;
    for (const auto& u : place_ues(c)) {
      sx += u.center.x;
      sy += u.center.y;
      ++n;
    }
  }
  ASSERT_EQ(n, 10000u);
  // BS sits at the cell centre (origin)
  EXPECT_LT(std::abs(sx / n), 2.0);
  EXPECT_LT(std::abs(sy / n), 2.0);
}

// --- random walk ----------------------------------------------------------

TEST(RandomWalk, ZeroNoiseIsStraightLine) {
  ScenarioConfig c;
  c.walk_box_edge_m = 90;
  c.walk_length_m = 10;
  const auto path = random_walk(c, {0, 0}, 1, {.initial_heading = 0.0, .turn_sigma = 0.0});
  ASSERT_EQ(path.size(), 1000u);
  for (std::size_t k = 0; k < path.size(); ++k) {
    EXPECT_NEAR(path[k].x, 0.01 * static_cast<double>(k + 1), 1e-9);
    EXPECT_EQ(path[k].y, 0.0);
  }
}

TEST(RandomWalk, StaysInsideBoxForManySeeds) {
  ScenarioConfig c;
  const Point start{12.5, -7.25};
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto path = random_walk(c, start, seed);
    ASSERT_EQ(path.size(), 10000u);
    for (const auto& p : path) {
      ASSERT_LE(std::abs(p.x - start.x), 3.0 + 1e-12) << "seed " << seed;
      ASSERT_LE(std::abs(p.y - start.y), 3.0 + 1e-12) << "seed " << seed;
    }
  }
}

TEST(RandomWalk, StepsAreExactlyTheSnapshotSpacing) {
  ScenarioConfig c;
  const Point start{3, 4};
  const auto path = random_walk(c, start, 99);
  double total = 0;
  Point prev = start;
  for (const auto& p : path) {
    const double step = distance(prev, p);
    EXPECT_NEAR(step, 0.01, 1e-12);
    total += step;
    prev = p;
  }
  EXPECT_NEAR(total, 100.0, 1e-9);
}

TEST(RandomWalk, DeterministicGivenSeed) {
  ScenarioConfig c;
  c.walk_length_m = 5;
  const auto a = random_walk(c, {1, 1}, 5), b = random_walk(c, {1, 1}, 5), d = random_walk(c, {1, 1}, 6);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].x, b[i].x);
    EXPECT_EQ(a[i].y, b[i].y);
  }
  EXPECT_NE(a.back().x, d.back().x);
}

// --- channel synthesis ----------------------------------------------------

TEST(Synthesize, BroadsideLosHasFlatAntennasAndLinearFrequencyPhase) {
  ScenarioConfig c;
  UeGeometry ue;  // no scatterers -> LOS only
  const Point pos{40, 0};
  const auto h = synthesize_channel(ue, pos, c).matrix;
  ASSERT_EQ(h.rows(), 32);
  ASSERT_EQ(h.cols(), 32);
  const double tau = 40.0 / kSpeedOfLight;
  const auto freqs = subcarrier_frequencies(c);
  for (Eigen::Index n = 0; n < h.rows(); ++n) {
    // row n is conj(g e^{-j2 pi f_n tau}) for every antenna, g = 1/40
    const Complex expected = std::conj(std::polar(1.0 / 40.0, -2.0 * std::numbers::pi * freqs[n] * tau));
    for (Eigen::Index k = 0; k < h.cols(); ++k) {
      EXPECT_NEAR(std::abs(h(n, k)), 1.0 / 40.0, 1e-15);
      EXPECT_NEAR(std::abs(h(n, k) - expected), 0.0, 1e-12);
    }
  }
}

TEST(Synthesize, SubcarriersSpanTheBandAroundTheCarrier) {
  ScenarioConfig c;
  const auto f = subcarrier_frequencies(c);
  ASSERT_EQ(f.size(), 32u);
  const double spacing = 70e6 / 32;
  for (std::size_t n = 1; n < f.size(); ++n) EXPECT_NEAR(f[n] - f[n - 1], spacing, 1e-3);
  EXPECT_NEAR(0.5 * (f.front() + f.back()), 2.655e9, 1e-3);
}

TEST(Synthesize, InfiniteRicianFactorLeavesOnlyLos) {
  ScenarioConfig c;
  c.rician_k_db = std::numeric_limits<double>::infinity();
  const auto ue = place_ue(c, 3);
  ASSERT_FALSE(ue.scatterers.empty());
  const Point pos{ue.center.x + 0.3, ue.center.y - 0.2};
  const auto full = synthesize_channel(ue, pos, c).matrix;
  const double d = std::hypot(pos.x, pos.y);
  const auto los = synthesize_from_paths({{Complex(1.0 / d, 0), pos.y / d, d / kSpeedOfLight}}, c).matrix;
  EXPECT_LT((full - los).norm(), 1e-15 * los.norm() + 1e-300);
}

TEST(Synthesize, DftAlignedScattererConcentratesInOneAngularBin) {
  ScenarioConfig c;
  const double sin_phi = 2.0 * 3 / 32.0;
  const double r = 40;
  UeGeometry ue;
  ue.scatterers.push_back({{r * std::sqrt(1 - sin_phi * sin_phi), r * sin_phi}, 0.7});
  const auto paths = path_components(ue, {20, -15}, c);
  ASSERT_EQ(paths.size(), 2u);
  EXPECT_NEAR(paths[1].sin_angle, sin_phi, 1e-12);
  const auto h = synthesize_from_paths({paths[1]}, c).matrix;
  const auto fa = unitary_dft(32);
  for (Eigen::Index n = 0; n < h.rows(); ++n) {
    const Eigen::RowVectorXcd row = h.row(n) * fa.adjoint();
    const double total = row.squaredNorm();
    const double peak = row.cwiseAbs2().maxCoeff();
    EXPECT_GT(peak / total, 0.99);
  }
}

TEST(Synthesize, SnapshotsAreFiniteAndNonZero) {
  const auto c = short_walk(2.0, 5);
  for (const auto& ue : place_ues(c)) {
    for (const auto& p : random_walk(c, ue.center, 1)) {
      const auto h = synthesize_channel(ue, p, c).matrix;
      ASSERT_TRUE(h.allFinite());
      ASSERT_GT(h.norm(), 0.0);
    }
  }
}

// --- DFT ------------------------------------------------------------------

TEST(Dft, MatricesAreUnitary) {
  for (std::size_t n : {1u, 4u, 32u}) {
    const auto f = unitary_dft(n);
    const auto eye = ComplexMatrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    EXPECT_LT((f * f.adjoint() - eye).cwiseAbs().maxCoeff(), 1e-12) << n;
  }
}

TEST(Dft, SizeOneIsIdentity) {
  ComplexMatrix h(1, 1);
  h(0, 0) = {0.3, -1.2};
  EXPECT_EQ(to_angular_delay(h, DftPair(1, 1))(0, 0), h(0, 0));
}

TEST(Dft, PreservesFrobeniusNormInDouble) {
  numeric::Rng rng(4);
  const DftPair dft(32, 32);
  for (int i = 0; i < 20; ++i) {
    const auto h = random_complex(32, 32, rng);
    EXPECT_NEAR(to_angular_delay(h, dft).norm(), h.norm(), 1e-10 * h.norm());
  }
}

TEST(Dft, MatchesNaiveSumOnFourByFour) {
  numeric::Rng rng(8);
  const DftPair dft(4, 4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto h = random_complex(4, 4, rng);
    std::vector<std::complex<double>> flat(16);
    for (int i = 0; i < 16; ++i) flat[static_cast<std::size_t>(i)] = h(i / 4, i % 4);
    const auto ref = oracle::angular_delay_naive(flat, 4, 4);
    const auto got = to_angular_delay(h, dft);
    for (int i = 0; i < 16; ++i) EXPECT_LT(std::abs(got(i / 4, i % 4) - ref[static_cast<std::size_t>(i)]), 1e-10);
  }
}

TEST(Dft, RectangularMatchesNaiveSum) {
  numeric::Rng rng(9);
  const auto h = random_complex(3, 5, rng);
  std::vector<std::complex<double>> flat(15);
  for (int i = 0; i < 15; ++i) flat[static_cast<std::size_t>(i)] = h(i / 5, i % 5);
  const auto ref = oracle::angular_delay_naive(flat, 3, 5);
  const auto got = to_angular_delay(h, DftPair(3, 5));
  for (int i = 0; i < 15; ++i) EXPECT_LT(std::abs(got(i / 5, i % 5) - ref[static_cast<std::size_t>(i)]), 1e-10);
}

TEST(Dft, DimensionMismatchIsShapeError) {
  EXPECT_THROW(to_angular_delay(ComplexMatrix::Zero(4, 4), DftPair(4, 8)), ShapeError);
}

TEST(Dft, StoredSinglePrecisionSamplesPreserveSnapshotEnergy) {
  const auto c = short_walk(0.5, 3);
  for (const auto& ue : place_ues(c)) {
    const auto ds = build_local_dataset(ue, c);
    const auto walk = random_walk(c, ue.center, numeric::derive_seed(ue_seed(c, ue.ue_id), "walk"));
    ASSERT_EQ(walk.size(), ds.count());
    const std::size_t stride = ds.sample_size();
    for (std::size_t i = 0; i < ds.count(); ++i) {
      const double h_energy = synthesize_channel(ue, walk[i], c).matrix.squaredNorm();
      double s = 0;
      for (std::size_t j = 0; j < stride; ++j) {
        const double v = ds.samples[i * stride + j];
        s += v * v;
      }
      s *= ds.norm_scale * ds.norm_scale;
      EXPECT_NEAR(s / h_energy, 1.0, 1e-6);
    }
  }
}

TEST(Dft, AngularDelayRepresentationIsSparse) {
  // default geometry; walks shortened so the check stays quick
  auto c = short_walk(1.0, 100);
  const auto ues = place_ues(c);
  const DftPair dft(c.subcarriers, c.antennas);
  double fraction_sum = 0;
  std::size_t count = 0;
  for (const auto& ue : ues) {
    const auto walk = random_walk(c, ue.center, numeric::derive_seed(ue_seed(c, ue.ue_id), "walk"));
    for (std::size_t i = 0; i < walk.size(); i += 25) {
      const auto ad = to_angular_delay(synthesize_channel(ue, walk[i], c).matrix, dft);
      std::vector<double> e(static_cast<std::size_t>(ad.size()));
      for (Eigen::Index k = 0; k < ad.size(); ++k) e[static_cast<std::size_t>(k)] = std::norm(ad.data()[k]);
      std::sort(e.begin(), e.end(), std::greater<>());
      const double total = std::accumulate(e.begin(), e.end(), 0.0);
      const double top = std::accumulate(e.begin(), e.begin() + static_cast<std::ptrdiff_t>(e.size() / 10), 0.0);
      fraction_sum += top / total;
      ++count;
    }
  }
  EXPECT_GT(fraction_sum / static_cast<double>(count), 0.8);
}

// --- datasets -------------------------------------------------------------

TEST(Dataset, DefaultsGiveNinetyTenSplitInUnitRange) {
  ScenarioConfig c;
  const auto ds = build_local_dataset(place_ue(c, 0), c);
  ASSERT_EQ(ds.count(), 10000u);
  EXPECT_EQ(ds.train.size(), 9000u);
  EXPECT_EQ(ds.test.size(), 1000u);
  float peak = 0;
  for (float v : ds.samples.data()) {
    ASSERT_LE(std::abs(v), 1.0f);
    peak = std::max(peak, std::abs(v));
  }
  EXPECT_EQ(peak, 1.0f);
  EXPECT_GT(ds.norm_scale, 0.0);
}

TEST(Dataset, SplitIsAPartition) {
  const auto c = short_walk(3.0);
  const auto ds = build_local_dataset(place_ue(c, 0), c);
  std::vector<std::size_t> all = ds.train;
  all.insert(all.end(), ds.test.begin(), ds.test.end());
  std::sort(all.begin(), all.end());
  ASSERT_EQ(all.size(), ds.count());
  for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i], i);
  EXPECT_EQ(ds.test.size(), 30u);
}

TEST(Dataset, SameSeedGivesIdenticalBytes) {
  const auto c = short_walk(2.0, 2);
  const auto ue = place_ue(c, 1);
  EXPECT_TRUE(same_bytes(build_local_dataset(ue, c), build_local_dataset(ue, c)));
  auto other = c;
  other.seed = c.seed + 1;
  EXPECT_FALSE(same_bytes(build_local_dataset(ue, c), build_local_dataset(place_ue(other, 1), other)));
}

TEST(Dataset, AllZeroSnapshotsAreGenerationError) {
  std::vector<ComplexMatrix> zeros(3, ComplexMatrix::Zero(4, 4));
  EXPECT_THROW(normalize_samples(0, zeros, 1), GenerationError);
}

TEST(DatasetIo, PayloadArithmetic) {
  EXPECT_EQ(dataset_payload_bytes(10000), 81'920'000u);
  EXPECT_EQ(dataset_payload_bytes(9000), 73'728'000u);
  EXPECT_EQ(kDatasetHeaderBytes, 34u);
}

TEST(DatasetIo, RoundTripThroughFile) {
  const auto dir = std::filesystem::temp_directory_path() / "digcsi_dataset_io";
  std::filesystem::remove_all(dir);
  const auto c = short_walk(1.0);
  const auto ds = build_local_dataset(place_ue(c, 0), c);
  write_dataset(dir / "ue.digc", ds);
  EXPECT_EQ(std::filesystem::file_size(dir / "ue.digc"), kDatasetHeaderBytes + dataset_payload_bytes(100));
  EXPECT_TRUE(std::filesystem::exists(sidecar_path(dir / "ue.digc")));
  const auto back = read_dataset(dir / "ue.digc");
  EXPECT_EQ(back.ue_id, ds.ue_id);
  EXPECT_EQ(back.norm_scale, ds.norm_scale);
  EXPECT_EQ(back.split_seed, ds.split_seed);
  EXPECT_EQ(back.samples, ds.samples);
  EXPECT_EQ(back.train, ds.train);
  EXPECT_EQ(back.test, ds.test);
  std::filesystem::remove_all(dir);
}

TEST(DatasetIo, CorruptInputsAreParseErrors) {
  const auto c = short_walk(0.2);
  const auto bytes = encode_dataset(build_local_dataset(place_ue(c, 0), c));

  auto truncated = bytes;
  truncated.resize(bytes.size() - 7);
  EXPECT_THROW(decode_dataset(truncated), ParseError);
  truncated.resize(10);
  EXPECT_THROW(decode_dataset(truncated), ParseError);

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  try {
    decode_dataset(bad_magic);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }

  auto bad_version = bytes;
  bad_version[4] = 9;
  try {
    decode_dataset(bad_version);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 4u);
  }

  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(decode_dataset(trailing), ParseError);
}

TEST(DatasetIo, MissingFileIsReported) {
  EXPECT_THROW(read_dataset("/nonexistent/ue_0000.digc"), MissingArtifactError);
}
