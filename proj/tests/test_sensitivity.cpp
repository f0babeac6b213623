#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dsse/sensitivity.hpp"
#include "helpers.hpp"

using namespace dsse;
using namespace testutil;

namespace {

// Two-node feeder carrying all three phases on the single line.
FeederModel two_bus_three_phase(const Eigen::Matrix3cd& z) {
  std::vector<NodeRecord> nodes(2);
  nodes[0].id = 0;
  nodes[0].phases = PhaseSet::abc();
  nodes[0].kind = NodeKind::Slack;
  nodes[1].id = 1;
  nodes[1].phases = PhaseSet::abc();
  nodes[1].kind = NodeKind::Load;
  for (int k = 0; k < 3; ++k) nodes[1].boxes.push_back(PqBox{-0.1, 0.0, -0.1, 0.1});
  LineRecord line;
  line.from = 0;
  line.to = 1;
  line.z = z;
  return FeederModel::from_records(std::move(nodes), {line}, {});
}

}  // namespace

TEST_CASE("single line doubles its impedance") {
  FeederModel model = chain_feeder(1, 0.013, 0.021);
  SensitivityModel sens = SensitivityModel::build(model);
  REQUIRE(sens.mode() == SensitivityMode::SinglePhase);
  CHECK(sens.R()(0, 0) == doctest::Approx(0.026).epsilon(1e-14));
  CHECK(sens.X()(0, 0) == doctest::Approx(0.042).epsilon(1e-14));
  CHECK(sens.v_tilde()[0] == 1.0);
}

TEST_CASE("entries sum resistances over the shared path") {
  // forked_feeder line k carries r = 0.01 * (k + 1); x = 0.02 on every line.
  FeederModel model = forked_feeder();
  SensitivityModel sens = SensitivityModel::build(model);
  const StateIndex& idx = model.state_index();
  const int e3 = idx.index_of(3, Phase::A);
  const int e4 = idx.index_of(4, Phase::A);
  const int e6 = idx.index_of(6, Phase::A);

  // Paths: 3 <- lines {0,1,2}, 4 <- {0,1,3}, 6 <- {0,4,5}.
  CHECK(sens.R()(e3, e4) == doctest::Approx(2 * (0.01 + 0.02)).epsilon(1e-14));
  CHECK(sens.R()(e3, e6) == doctest::Approx(2 * 0.01).epsilon(1e-14));
  CHECK(sens.R()(e3, e3) == doctest::Approx(2 * (0.01 + 0.02 + 0.03)).epsilon(1e-14));
  CHECK(sens.X()(e3, e4) == doctest::Approx(2 * 0.04).epsilon(1e-14));

  CHECK((sens.R() - sens.R().transpose()).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((sens.X() - sens.X().transpose()).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("single-phase entries match the path oracle on random feeders") {
  for (std::uint64_t seed : {21u, 22u, 23u}) {
    FeederSpec spec;
    spec.size = 35;
    spec.seed = seed;
    FeederModel model = generate_feeder(spec);
    SensitivityModel sens = SensitivityModel::build(model);
    const StateIndex& idx = model.state_index();
    for (int a = 0; a < idx.size(); ++a)
      for (int b = 0; b < idx.size(); ++b) {
        double expect = 0.0;
        for (int line :
             path_intersection(model, idx.entry(a).node, idx.entry(b).node))
          expect +=
              2.0 * model.lines()[static_cast<size_t>(line)].z(0, 0).real();
        CHECK(sens.R()(a, b) == doctest::Approx(expect).epsilon(1e-13));
      }
  }
}

TEST_CASE("phase rotation table is exact") {
  const double s = std::sqrt(3.0) / 2.0;
  CHECK(phase_rotation(Phase::A, Phase::A) == std::complex<double>(1.0, 0.0));
  CHECK(phase_rotation(Phase::B, Phase::A) == std::complex<double>(-0.5, -s));
  CHECK(phase_rotation(Phase::A, Phase::B) == std::complex<double>(-0.5, s));
  // Two steps wrap to the opposite single step.
  CHECK(phase_rotation(Phase::C, Phase::A) == phase_rotation(Phase::A, Phase::B));
  CHECK(phase_rotation(Phase::A, Phase::C) == phase_rotation(Phase::B, Phase::A));
}

TEST_CASE("diagonal impedance produces no cross-phase sensitivity") {
  Eigen::Matrix3cd z = Eigen::Matrix3cd::Zero();
  z(0, 0) = {0.01, 0.02};
  z(1, 1) = {0.012, 0.019};
  z(2, 2) = {0.011, 0.021};
  FeederModel model = two_bus_three_phase(z);
  SensitivityModel sens = SensitivityModel::build(model);
  REQUIRE(sens.mode() == SensitivityMode::MultiPhase);

  const StateIndex& idx = model.state_index();
  for (Phase pr : {Phase::A, Phase::B, Phase::C})
    for (Phase pc : {Phase::A, Phase::B, Phase::C}) {
      const int row = idx.index_of(1, pr);
      const int col = idx.index_of(1, pc);
      if (pr == pc) {
        const int d = static_cast<int>(pr);
        CHECK(sens.R()(row, col) == doctest::Approx(2 * z(d, d).real()));
        CHECK(sens.X()(row, col) == doctest::Approx(2 * z(d, d).imag()));
      } else {
        CHECK(sens.R()(row, col) == 0.0);
        CHECK(sens.X()(row, col) == 0.0);
      }
    }
}

TEST_CASE("full mutual impedance follows the rotated conjugate") {
  Eigen::Matrix3cd z;
  z << std::complex<double>(0.010, 0.025), std::complex<double>(0.004, 0.008),
      std::complex<double>(0.003, 0.007), std::complex<double>(0.004, 0.008),
      std::complex<double>(0.011, 0.024), std::complex<double>(0.005, 0.006),
      std::complex<double>(0.003, 0.007), std::complex<double>(0.005, 0.006),
      std::complex<double>(0.012, 0.023);
  FeederModel model = two_bus_three_phase(z);
  SensitivityModel sens = SensitivityModel::build(model);
  const StateIndex& idx = model.state_index();

  for (Phase pr : {Phase::A, Phase::B, Phase::C})
    for (Phase pc : {Phase::A, Phase::B, Phase::C}) {
      const std::complex<double> c =
          std::conj(z(static_cast<int>(pr), static_cast<int>(pc))) *
          phase_rotation(pr, pc);
      const int row = idx.index_of(1, pr);
      const int col = idx.index_of(1, pc);
      CHECK(sens.R()(row, col) == doctest::Approx(2.0 * c.real()).epsilon(1e-14));
      CHECK(sens.X()(row, col) == doctest::Approx(-2.0 * c.imag()).epsilon(1e-14));
    }

  // Mutual coupling makes the matrix asymmetric across phase pairs.
  const int ra = idx.index_of(1, Phase::A);
  const int rb = idx.index_of(1, Phase::B);
  CHECK(sens.R()(ra, rb) != sens.R()(rb, ra));
}

TEST_CASE("multi-phase entries match the path-enumeration oracle") {
  for (std::uint64_t seed : {31u, 32u, 33u}) {
    FeederSpec spec;
    spec.size = 25;
    spec.three_phase = true;
    spec.seed = seed;
    FeederModel model = generate_feeder(spec);
    SensitivityModel sens = SensitivityModel::build(model);
    const StateIndex& idx = model.state_index();

    double worst = 0.0;
    for (int a = 0; a < idx.size(); ++a)
      for (int b = 0; b < idx.size(); ++b) {
        const auto [r, x] = sensitivity_oracle(model, idx.entry(a).node,
                                               idx.entry(a).phase, idx.entry(b).node,
                                               idx.entry(b).phase);
        worst = std::max(worst, std::abs(sens.R()(a, b) - r));
        worst = std::max(worst, std::abs(sens.X()(a, b) - x));
      }
    CHECK(worst <= 1e-12);
  }
}

TEST_CASE("voltage prediction applies the affine model") {
  FeederModel model = chain_feeder(3, 0.01, 0.02, 0.05);
  SensitivityModel sens = SensitivityModel::build(model);
  Injections inj = nominal_injections(model);
  Eigen::VectorXd v = sens.predict_voltage(inj);
  Eigen::VectorXd manual = sens.R() * inj.p + sens.X() * inj.q + sens.v_tilde();
  CHECK((v - manual).lpNorm<Eigen::Infinity>() == 0.0);
  // Consumption must depress squared magnitudes below the no-load profile.
  for (int k = 0; k < v.size(); ++k) CHECK(v[k] < 1.0);
}

TEST_CASE("aggregated path blocks are complete at the meet point") {
  FeederSpec spec;
  spec.size = 30;
  spec.three_phase = true;
  spec.seed = 41;
  FeederModel model = generate_feeder(spec);
  Rng rng(7);
  for (int trial = 0; trial < 40; ++trial) {
    const int i = rng.uniform_int(1, spec.size);
    const int j = rng.uniform_int(1, spec.size);
    Eigen::Matrix3cd sum = path_impedance_sum(model, i, j);
    Eigen::Matrix3cd conj_sum = conjugated_path_impedance(model, i, j);

    Eigen::Matrix3cd expect = Eigen::Matrix3cd::Zero();
    for (int line_idx : path_intersection(model, i, j)) {
      const LineRecord& line = model.lines()[static_cast<size_t>(line_idx)];
      const auto list = model.node(line.to).phases.list();
      for (size_t r = 0; r < list.size(); ++r)
        for (size_t c = 0; c < list.size(); ++c)
          expect(static_cast<int>(list[r]), static_cast<int>(list[c])) +=
              line.z(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }
    const PhaseSet pi = model.node(i).phases;
    const PhaseSet pj = model.node(j).phases;
    for (Phase pr : pi.list())
      for (Phase pc : pj.list()) {
        const int r = static_cast<int>(pr);
        const int c = static_cast<int>(pc);
        CHECK(std::abs(sum(r, c) - expect(r, c)) <= 1e-15);
        CHECK(std::abs(conj_sum(r, c) - std::conj(expect(r, c))) <= 1e-15);
      }
  }
}

TEST_CASE("block-compressed form reconstructs the dense matrices exactly") {
  FeederSpec spec;
  spec.size = 40;
  spec.seed = 51;
  SUBCASE("single phase") {}
  SUBCASE("three phase") { spec.three_phase = true; }

  FeederModel model = generate_feeder(spec);
  SensitivityModel sens = SensitivityModel::build(model);
  Rng rng(8);
  std::vector<int> roots = pick_non_nested_roots(model, 3, rng);
  REQUIRE(roots.size() >= 2);
  AreaPartition areas = partition(model, roots);
  CompressedSensitivity comp = CompressedSensitivity::build(model, sens, areas);

  CHECK((comp.reconstruct_R() - sens.R()).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((comp.reconstruct_X() - sens.X()).lpNorm<Eigen::Infinity>() == 0.0);
  for (int a = 0; a < sens.size(); a += 7)
    for (int b = 0; b < sens.size(); b += 5) {
      const SensitivityPair pair = comp.entry(a, b);
      CHECK(pair.r == sens.R()(a, b));
      CHECK(pair.x == sens.X()(a, b));
    }

  // Storage only wins when the areas are large and little stays unclustered;
  // rooting one area per slack child leaves no unclustered state entries.
  std::vector<int> top = model.children(model.slack_id());
  REQUIRE(top.size() >= 2);
  CompressedSensitivity tight =
      CompressedSensitivity::build(model, sens, partition(model, top));
  CHECK((tight.reconstruct_R() - sens.R()).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(tight.stored_scalars() < tight.dense_scalars());
}

TEST_CASE("block compression rejects nested partitions") {
  FeederModel model = forked_feeder();
  SensitivityModel sens = SensitivityModel::build(model);
  AreaPartition nested = partition(model, {1, 2});
  CHECK_THROWS_AS(CompressedSensitivity::build(model, sens, nested),
                  ValidationError);
}
