#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "symlab/nn.hpp"
#include "symlab/quadrature.hpp"

namespace symlab {
namespace qcd {

// Degrees of freedom: gluons, up/down quarks, strange quarks.
struct DofConstants {
  static constexpr int d_g = 16;
  static constexpr int d_ud = 24;
  static constexpr int d_s = 12;
};

constexpr double kCriticalTemperature = 0.155;  // GeV

// Thermal mass m(T) in GeV; always >= 0.
class MassModel {
public:
  static MassModel constant(double m);
  // Linear interpolation; queries outside [T.front(), T.back()] throw.
  static MassModel table(std::vector<double> temperatures, std::vector<double> masses);
  // Small dense net, softplus output. expanded = true feeds [T, T_c].
  static MassModel mlp(std::shared_ptr<nn::Model> model, bool expanded_input,
                       double t_c = kCriticalTemperature);

  double operator()(double temperature) const;

  bool is_mlp() const { return kind_ == Kind::Mlp; }
  nn::Model& model() { return *model_; }
  const nn::Model& model() const { return *model_; }
  bool expanded_input() const { return expanded_; }
  double t_c() const { return t_c_; }

private:
  enum class Kind { Constant, Table, Mlp };
  Kind kind_ = Kind::Constant;
  double value_ = 0.0;
  std::vector<double> table_t_, table_m_;
  std::shared_ptr<nn::Model> model_;
  bool expanded_ = false;
  double t_c_ = kCriticalTemperature;
};

// Network layout used by the mlp kind: dense -> sigmoid -> dense(32) ->
// sigmoid -> dense(1) -> softplus.
nn::NetworkSpec mass_mlp_spec(bool expanded_input);

struct ThermoPoint {
  double T = 0.0;    // GeV
  double P = 0.0;    // GeV^4
  double eps = 0.0;  // GeV^4
  double s = 0.0;    // GeV^3, (eps + P) / T by construction

  ThermoPoint(double T, double P, double eps);
};

// ln Z per unit volume, GeV^3.
double lnz_boson(double m, double T, int d, const QuadratureRule& rule);
double lnz_fermion(double m, double T, int d, const QuadratureRule& rule);

// d(lnZ)/dm at fixed T (analytic quadrature; <= 0). Drives the fit gradient.
double dlnz_dm_boson(double m, double T, int d, const QuadratureRule& rule);
double dlnz_dm_fermion(double m, double T, int d, const QuadratureRule& rule);

// Fixed-mass energy density contribution (d/2pi^2) Int p^2 E / (e^{E/T} -+ 1) dp;
// an independent oracle for the central-difference path.
double energy_density_boson(double m, double T, int d, const QuadratureRule& rule);
double energy_density_fermion(double m, double T, int d, const QuadratureRule& rule);

struct MassModels {
  MassModel m_g = MassModel::constant(0.0);
  MassModel m_ud = MassModel::constant(0.0);
  MassModel m_s = MassModel::constant(0.0);
};

// P = T lnZ; eps = T^2 dlnZ/dT (central difference, default step T/200);
// s = (eps + P)/T.
ThermoPoint eos_point(double T, const MassModels& models,
                      const QuadratureRule& rule, double dT = 0.0);

struct EosRow {
  double T = 0.0;
  double P_over_T4 = 0.0;
  double eps_over_T4 = 0.0;
  double s_over_T3 = 0.0;
};

std::vector<EosRow> eos_table(const std::vector<double>& temperatures,
                              const MassModels& models, const QuadratureRule& rule,
                              int workers = 1);

// Stand-in for a lattice table: constant-mass quasi-particle gas swept over
// [t_lo, t_hi].
std::vector<EosRow> synthetic_target(double m_g, double m_ud, double m_s,
                                     double t_lo, double t_hi, int n,
                                     const QuadratureRule& rule);

void write_eos_csv(const std::string& path, const std::vector<EosRow>& rows);
std::vector<EosRow> read_eos_csv(const std::string& path);

enum class InputMode { Raw, Expanded };

struct FitResult {
  MassModels models;
  std::vector<double> temperatures;
  std::vector<double> mae_pressure;  // |P/T^4 - target| per row
  std::vector<double> mae_energy;    // |eps/T^4 - target| per row
  std::vector<double> loss_trace;    // per epoch
  std::int64_t clamp_warnings = 0;   // negative-mass outputs clamped to 0
};

// Joint MSE fit of the three thermal-mass nets to (P/T^4, eps/T^4), equal
// weighting; gradients flow through the analytic d(lnZ)/dm quadratures.
FitResult fit_mass_models(const std::vector<EosRow>& target, InputMode mode,
                          const nn::TrainConfig& train,
                          double t_c = kCriticalTemperature);

}  // namespace qcd
}  // namespace symlab
