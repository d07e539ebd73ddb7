#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <vector>

#include "symlab/errors.hpp"
#include "symlab/qcd.hpp"

using namespace symlab;
namespace q = symlab::qcd;

namespace {

const QuadratureRule& rule50() {
  static QuadratureRule r = gauss_legendre(50);
  return r;
}

constexpr double kPi2 = std::numbers::pi * std::numbers::pi;

// Stefan-Boltzmann pressures, independent closed forms.
double sb_boson_pressure(int d, double T) { return d * kPi2 * T * T * T * T / 90.0; }
double sb_fermion_pressure(int d, double T) { return 7.0 / 8.0 * sb_boson_pressure(d, T); }

}  // namespace

TEST_CASE("massless partition functions reproduce Stefan-Boltzmann") {
  // d=16 gluons at T=0.3 GeV
  const double p_g = 0.3 * q::lnz_boson(0.0, 0.3, 16, rule50());
  CHECK(p_g == doctest::Approx(sb_boson_pressure(16, 0.3)).epsilon(1e-5));
  CHECK(sb_boson_pressure(16, 0.3) == doctest::Approx(0.0142122).epsilon(1e-4));

  // d=24 light quarks
  const double p_ud = 0.3 * q::lnz_fermion(0.0, 0.3, 24, rule50());
  CHECK(p_ud == doctest::Approx(sb_fermion_pressure(24, 0.3)).epsilon(1e-5));
  CHECK(sb_fermion_pressure(24, 0.3) == doctest::Approx(0.0186536).epsilon(1e-4));

  // fermion/boson massless ratio at equal d
  for (double T : {0.15, 0.3, 0.45}) {
    const double ratio = q::lnz_fermion(0.0, T, 10, rule50()) /
                         q::lnz_boson(0.0, T, 10, rule50());
    CHECK(ratio == doctest::Approx(7.0 / 8.0).epsilon(1e-8));
  }
}

TEST_CASE("heavy-mass suppression and monotonicity in m") {
  // Boltzmann tail: lnZ -> (d/2pi^2) x^2 K_2(x) T^3 with x = m/T; at x = 50
  // that is ~7e-20 T^3, so both statistics collapse onto it.
  const double x = 50.0;
  const double boltzmann = x * x * std::cyl_bessel_k(2, x) / (2.0 * kPi2);
  for (double T : {0.2, 0.4}) {
    const double t3 = T * T * T;
    CHECK(std::abs(q::lnz_boson(x * T, T, 16, rule50())) < 5e-19 * t3);
    CHECK(std::abs(q::lnz_fermion(x * T, T, 24, rule50())) < 5e-19 * t3);
    CHECK(q::lnz_boson(x * T, T, 16, rule50()) ==
          doctest::Approx(16.0 * boltzmann * t3).epsilon(1e-3));
    CHECK(q::lnz_fermion(x * T, T, 24, rule50()) ==
          doctest::Approx(24.0 * boltzmann * t3).epsilon(1e-3));

    double prev_b = q::lnz_boson(0.0, T, 16, rule50());
    double prev_f = q::lnz_fermion(0.0, T, 24, rule50());
    for (double m = 0.1; m <= 2.0; m += 0.1) {
      const double b = q::lnz_boson(m, T, 16, rule50());
      const double f = q::lnz_fermion(m, T, 24, rule50());
      CHECK(b < prev_b);
      CHECK(f < prev_f);
      prev_b = b;
      prev_f = f;
    }
  }
}

TEST_CASE("dlnz_dm matches central differences") {
  const double h = 1e-6;
  for (double T : {0.2, 0.35}) {
    for (double m : {0.1, 0.4, 0.8}) {
      const double fd_b =
          (q::lnz_boson(m + h, T, 16, rule50()) - q::lnz_boson(m - h, T, 16, rule50())) /
          (2 * h);
      const double fd_f =
          (q::lnz_fermion(m + h, T, 24, rule50()) - q::lnz_fermion(m - h, T, 24, rule50())) /
          (2 * h);
      CHECK(q::dlnz_dm_boson(m, T, 16, rule50()) == doctest::Approx(fd_b).epsilon(1e-6));
      CHECK(q::dlnz_dm_fermion(m, T, 24, rule50()) == doctest::Approx(fd_f).epsilon(1e-6));
      CHECK(q::dlnz_dm_boson(m, T, 16, rule50()) < 0.0);
      CHECK(q::dlnz_dm_fermion(m, T, 24, rule50()) < 0.0);
    }
  }
}

TEST_CASE("quadrature convergence: n=50 vs n=100 on massless checks") {
  const QuadratureRule r100 = gauss_legendre(100);
  for (double T : {0.1, 0.3, 0.5}) {
    CHECK(q::lnz_boson(0.0, T, 16, rule50()) ==
          doctest::Approx(q::lnz_boson(0.0, T, 16, r100)).epsilon(1e-8));
    CHECK(q::lnz_fermion(0.0, T, 24, rule50()) ==
          doctest::Approx(q::lnz_fermion(0.0, T, 24, r100)).epsilon(1e-8));
  }
}

TEST_CASE("eos_point closed forms and the thermodynamic identity") {
  // all masses zero at T=0.3: P = (16 + 7/8*(24+12)) pi^2 T^4 / 90
  q::MassModels massless;
  const auto pt = q::eos_point(0.3, massless, rule50());
  const double p_expect = sb_boson_pressure(16, 0.3) + sb_fermion_pressure(36, 0.3);
  CHECK(pt.P == doctest::Approx(p_expect).epsilon(1e-4));
  CHECK(p_expect == doctest::Approx(0.0422).epsilon(2e-3));

  // conformal limit: eps = 3P, s = 4P/T
  CHECK(pt.eps == doctest::Approx(3.0 * pt.P).epsilon(1e-4));
  CHECK(pt.s == doctest::Approx(4.0 * pt.P / 0.3).epsilon(1e-4));

  // identity s = (eps + P)/T at 1e-10 relative, any model
  q::MassModels massive{q::MassModel::constant(0.6), q::MassModel::constant(0.3),
                        q::MassModel::constant(0.4)};
  for (double T : {0.12, 0.2, 0.3, 0.45}) {
    const auto p = q::eos_point(T, massive, rule50());
    CHECK(p.s == doctest::Approx((p.eps + p.P) / T).epsilon(1e-10));
    CHECK(p.P >= 0.0);
    CHECK(p.eps >= 0.0);
  }
}

TEST_CASE("constant-mass energy density: central difference vs analytic integrand") {
  q::MassModels m{q::MassModel::constant(0.6), q::MassModel::constant(0.3),
                  q::MassModel::constant(0.4)};
  for (double T : {0.15, 0.25, 0.4}) {
    const auto pt = q::eos_point(T, m, rule50());
    const double analytic = q::energy_density_boson(0.6, T, 16, rule50()) +
                            q::energy_density_fermion(0.3, T, 24, rule50()) +
                            q::energy_density_fermion(0.4, T, 12, rule50());
    CHECK(pt.eps == doctest::Approx(analytic).epsilon(1e-4));
  }
}

TEST_CASE("constant masses: s = dP/dT within 1e-3") {
  q::MassModels m{q::MassModel::constant(0.5), q::MassModel::constant(0.25),
                  q::MassModel::constant(0.35)};
  for (double T : {0.2, 0.35}) {
    const double h = T / 500.0;
    const double dPdT = (q::eos_point(T + h, m, rule50()).P -
                         q::eos_point(T - h, m, rule50()).P) /
                        (2 * h);
    CHECK(q::eos_point(T, m, rule50()).s == doctest::Approx(dPdT).epsilon(1e-3));
  }
}

TEST_CASE("ThermoPoint construction enforces the identity") {
  const q::ThermoPoint p(0.3, 0.01, 0.03);
  CHECK(p.s == doctest::Approx((0.03 + 0.01) / 0.3).epsilon(1e-12));
}

TEST_CASE("mass model kinds") {
  const auto c = q::MassModel::constant(0.42);
  CHECK(c(0.1) == 0.42);
  CHECK(c(0.5) == 0.42);

  const auto t = q::MassModel::table({0.1, 0.2, 0.3}, {1.0, 2.0, 4.0});
  CHECK(t(0.1) == doctest::Approx(1.0));
  CHECK(t(0.15) == doctest::Approx(1.5));
  CHECK(t(0.25) == doctest::Approx(3.0));
  CHECK(t(0.3) == doctest::Approx(4.0));
  CHECK_THROWS_AS(t(0.05), std::invalid_argument);
  CHECK_THROWS_AS(t(0.35), std::invalid_argument);

  // mlp kind: softplus output keeps m >= 0 everywhere
  auto model = std::make_shared<nn::Model>(q::mass_mlp_spec(false));
  Prng prng(3);
  model->init_params(prng);
  const auto mlp = q::MassModel::mlp(model, false);
  CHECK(mlp.is_mlp());
  for (double T = 0.05; T < 0.6; T += 0.05) CHECK(mlp(T) >= 0.0);
}

TEST_CASE("eos_table parallelism and CSV round trip") {
  std::vector<double> temps;
  for (int i = 0; i < 12; ++i) temps.push_back(0.1 + 0.03 * i);
  q::MassModels m{q::MassModel::constant(0.6), q::MassModel::constant(0.3),
                  q::MassModel::constant(0.4)};
  const auto one = q::eos_table(temps, m, rule50(), 1);
  const auto four = q::eos_table(temps, m, rule50(), 4);
  REQUIRE(one.size() == temps.size());
  REQUIRE(four.size() == temps.size());
  for (std::size_t i = 0; i < one.size(); ++i) {
    CHECK(one[i].P_over_T4 == four[i].P_over_T4);
    CHECK(one[i].eps_over_T4 == four[i].eps_over_T4);
    CHECK(one[i].s_over_T3 == four[i].s_over_T3);
  }

  const auto path = std::filesystem::temp_directory_path() / "eos_roundtrip.csv";
  q::write_eos_csv(path.string(), one);
  const auto back = q::read_eos_csv(path.string());
  REQUIRE(back.size() == one.size());
  for (std::size_t i = 0; i < one.size(); ++i) {
    CHECK(back[i].T == doctest::Approx(one[i].T).epsilon(1e-12));
    CHECK(back[i].P_over_T4 == doctest::Approx(one[i].P_over_T4).epsilon(1e-12));
    CHECK(back[i].eps_over_T4 == doctest::Approx(one[i].eps_over_T4).epsilon(1e-12));
    CHECK(back[i].s_over_T3 == doctest::Approx(one[i].s_over_T3).epsilon(1e-12));
  }
  std::filesystem::remove(path);
}

TEST_CASE("malformed EoS CSV is rejected") {
  const auto path = std::filesystem::temp_directory_path() / "eos_bad.csv";
  {
    std::FILE* f = std::fopen(path.string().c_str(), "w");
    std::fputs("T_GeV,P_over_T4,eps_over_T4,s_over_T3\n0.1,0.2,0.3\n", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(q::read_eos_csv(path.string()), FormatError);
  std::filesystem::remove(path);
}

TEST_CASE("synthetic target matches eos_point row by row") {
  const auto rows = q::synthetic_target(0.6, 0.3, 0.4, 0.1, 0.5, 9, rule50());
  REQUIRE(rows.size() == 9);
  CHECK(rows.front().T == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(rows.back().T == doctest::Approx(0.5).epsilon(1e-12));
  q::MassModels m{q::MassModel::constant(0.6), q::MassModel::constant(0.3),
                  q::MassModel::constant(0.4)};
  for (const auto& row : rows) {
    const auto pt = q::eos_point(row.T, m, rule50());
    CHECK(row.P_over_T4 == doctest::Approx(pt.P / std::pow(row.T, 4)).epsilon(1e-12));
    CHECK(row.eps_over_T4 == doctest::Approx(pt.eps / std::pow(row.T, 4)).epsilon(1e-12));
  }
}

TEST_CASE("fit preconditions and zero-epoch baseline") {
  const auto target = q::synthetic_target(0.6, 0.3, 0.4, 0.1, 0.5, 10, rule50());

  nn::TrainConfig cfg;
  cfg.lr = 1e-2;
  cfg.epochs = 1;
  cfg.seed = 7;

  // too few rows
  std::vector<q::EosRow> tiny(target.begin(), target.begin() + 4);
  CHECK_THROWS_AS(q::fit_mass_models(tiny, q::InputMode::Raw, cfg), std::invalid_argument);

  // temperatures must ascend
  auto shuffled = target;
  std::swap(shuffled[2], shuffled[5]);
  CHECK_THROWS_AS(q::fit_mass_models(shuffled, q::InputMode::Raw, cfg),
                  std::invalid_argument);

  // one epoch at lr=1e-12 barely moves: errors match the untrained baseline
  nn::TrainConfig frozen = cfg;
  frozen.lr = 1e-12;
  const auto held = q::fit_mass_models(target, q::InputMode::Raw, frozen);
  const auto held2 = q::fit_mass_models(target, q::InputMode::Raw, frozen);
  REQUIRE(held.mae_pressure.size() == target.size());
  for (std::size_t i = 0; i < held.mae_pressure.size(); ++i)
    CHECK(held.mae_pressure[i] == held2.mae_pressure[i]);  // deterministic
}

TEST_CASE("synthetic self-consistency fit: raw and expanded reach MAE < 1e-2") {
  const auto target = q::synthetic_target(0.6, 0.3, 0.4, 0.1, 0.5, 12, rule50());

  nn::TrainConfig cfg;
  cfg.lr = 2e-2;
  cfg.epochs = 400;
  cfg.seed = 7;

  for (auto mode : {q::InputMode::Raw, q::InputMode::Expanded}) {
    const auto fit = q::fit_mass_models(target, mode, cfg);
    REQUIRE(fit.mae_pressure.size() == target.size());
    double mae = 0.0;
    for (double e : fit.mae_pressure) mae += e;
    mae /= static_cast<double>(fit.mae_pressure.size());
    CHECK(mae < 1e-2);
    for (double t : fit.temperatures) CHECK(fit.models.m_g(t) >= 0.0);
  }
}
