#include "symlab/qcd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "symlab/errors.hpp"
#include "symlab/expansion.hpp"
#include "symlab/io.hpp"

namespace symlab {
namespace qcd {

namespace {

constexpr double kTwoPiSq = 2.0 * M_PI * M_PI;

void check_mt(double m, double T, const char* who) {
  if (!(T > 0.0)) throw std::invalid_argument(std::string(who) + ": T must be > 0");
  if (!(m >= 0.0)) throw std::invalid_argument(std::string(who) + ": m must be >= 0");
}

}  // namespace

MassModel MassModel::constant(double m) {
  if (!(m >= 0.0)) throw std::invalid_argument("MassModel::constant: m must be >= 0");
  MassModel mm;
  mm.kind_ = Kind::Constant;
  mm.value_ = m;
  return mm;
}

MassModel MassModel::table(std::vector<double> temperatures, std::vector<double> masses) {
  if (temperatures.size() != masses.size() || temperatures.size() < 2)
    throw std::invalid_argument("MassModel::table: need >= 2 matching points");
  for (std::size_t i = 1; i < temperatures.size(); ++i)
    if (temperatures[i] <= temperatures[i - 1])
      throw std::invalid_argument("MassModel::table: temperatures must ascend");
  for (double m : masses)
    if (!(m >= 0.0)) throw std::invalid_argument("MassModel::table: m must be >= 0");
  MassModel mm;
  mm.kind_ = Kind::Table;
  mm.table_t_ = std::move(temperatures);
  mm.table_m_ = std::move(masses);
  return mm;
}

MassModel MassModel::mlp(std::shared_ptr<nn::Model> model, bool expanded_input,
                         double t_c) {
  MassModel mm;
  mm.kind_ = Kind::Mlp;
  mm.model_ = std::move(model);
  mm.expanded_ = expanded_input;
  mm.t_c_ = t_c;
  return mm;
}

double MassModel::operator()(double temperature) const {
  switch (kind_) {
    case Kind::Constant:
      return value_;
    case Kind::Table: {
      if (temperature < table_t_.front() || temperature > table_t_.back())
        throw std::invalid_argument("MassModel::table: T outside table range");
      auto it = std::upper_bound(table_t_.begin(), table_t_.end(), temperature);
      if (it == table_t_.end()) return table_m_.back();
      if (it == table_t_.begin()) return table_m_.front();
      const std::size_t hi = static_cast<std::size_t>(it - table_t_.begin());
      const std::size_t lo = hi - 1;
      const double w = (temperature - table_t_[lo]) / (table_t_[hi] - table_t_[lo]);
      return table_m_[lo] + w * (table_m_[hi] - table_m_[lo]);
    }
    case Kind::Mlp: {
      std::vector<double> in =
          expanded_ ? expansion::expand_vector({temperature}, {t_c_},
                                               expansion::append_pattern(1, 1))
                    : std::vector<double>{temperature};
      Tensor batch({1, static_cast<std::int64_t>(in.size())}, in);
      Prng prng(0);
      const Eigen::MatrixXd out = model_->forward_raw(batch, nn::Mode::Eval, prng);
      return std::max(0.0, out(0, 0));
    }
  }
  return 0.0;
}

nn::NetworkSpec mass_mlp_spec(bool expanded_input) {
  nn::NetworkSpec spec;
  const int in = expanded_input ? 2 : 1;
  spec.input_shape = {in};
  spec.loss = nn::LossKind::MeanSquaredError;
  spec.layers = {
      nn::LayerSpec::dense(in, 32), nn::LayerSpec::sigmoid(),
      nn::LayerSpec::dense(32, 32), nn::LayerSpec::sigmoid(),
      nn::LayerSpec::dense(32, 1),  nn::LayerSpec::softplus(),
  };
  return spec;
}

ThermoPoint::ThermoPoint(double T, double P, double eps) : T(T), P(P), eps(eps) {
  if (!(T > 0.0)) throw std::invalid_argument("ThermoPoint: T must be > 0");
  if (!std::isfinite(P) || !std::isfinite(eps))
    throw NumericalError("ThermoPoint: non-finite P or eps");
  s = (eps + P) / T;
}

double lnz_boson(double m, double T, int d, const QuadratureRule& rule) {
  check_mt(m, T, "lnz_boson");
  const double integral = integrate_semi_infinite(
      [&](double p) {
        const double e = std::sqrt(p * p + m * m);
        return p * p * std::log1p(-std::exp(-e / T));
      },
      rule, 5.0 * T);
  return -static_cast<double>(d) / kTwoPiSq * integral;
}

double lnz_fermion(double m, double T, int d, const QuadratureRule& rule) {
  check_mt(m, T, "lnz_fermion");
  const double integral = integrate_semi_infinite(
      [&](double p) {
        const double e = std::sqrt(p * p + m * m);
        return p * p * std::log1p(std::exp(-e / T));
      },
      rule, 5.0 * T);
  return static_cast<double>(d) / kTwoPiSq * integral;
}

double dlnz_dm_boson(double m, double T, int d, const QuadratureRule& rule) {
  check_mt(m, T, "dlnz_dm_boson");
  if (m == 0.0) return 0.0;
  const double integral = integrate_semi_infinite(
      [&](double p) {
        const double e = std::sqrt(p * p + m * m);
        return p * p * (m / (e * T)) / std::expm1(e / T);
      },
      rule, 5.0 * T);
  return -static_cast<double>(d) / kTwoPiSq * integral;
}

double dlnz_dm_fermion(double m, double T, int d, const QuadratureRule& rule) {
  check_mt(m, T, "dlnz_dm_fermion");
  if (m == 0.0) return 0.0;
  const double integral = integrate_semi_infinite(
      [&](double p) {
        const double e = std::sqrt(p * p + m * m);
        return p * p * (m / (e * T)) / (std::exp(e / T) + 1.0);
      },
      rule, 5.0 * T);
  return -static_cast<double>(d) / kTwoPiSq * integral;
}

double energy_density_boson(double m, double T, int d, const QuadratureRule& rule) {
  check_mt(m, T, "energy_density_boson");
  const double integral = integrate_semi_infinite(
      [&](double p) {
        const double e = std::sqrt(p * p + m * m);
        return p * p * e / std::expm1(e / T);
      },
      rule, 5.0 * T);
  return static_cast<double>(d) / kTwoPiSq * integral;
}

double energy_density_fermion(double m, double T, int d, const QuadratureRule& rule) {
  check_mt(m, T, "energy_density_fermion");
  const double integral = integrate_semi_infinite(
      [&](double p) {
        const double e = std::sqrt(p * p + m * m);
        return p * p * e / (std::exp(e / T) + 1.0);
      },
      rule, 5.0 * T);
  return static_cast<double>(d) / kTwoPiSq * integral;
}

namespace {

double lnz_total(double T, const MassModels& models, const QuadratureRule& rule) {
  return lnz_boson(models.m_g(T), T, DofConstants::d_g, rule) +
         lnz_fermion(models.m_ud(T), T, DofConstants::d_ud, rule) +
         lnz_fermion(models.m_s(T), T, DofConstants::d_s, rule);
}

}  // namespace

ThermoPoint eos_point(double T, const MassModels& models,
                      const QuadratureRule& rule, double dT) {
  if (!(T > 0.0)) throw std::invalid_argument("eos_point: T must be > 0");
  if (dT <= 0.0) dT = T / 200.0;
  if (!(T - dT > 0.0)) throw std::invalid_argument("eos_point: T - dT must be > 0");
  const double lnz = lnz_total(T, models, rule);
  const double lnz_hi = lnz_total(T + dT, models, rule);
  const double lnz_lo = lnz_total(T - dT, models, rule);
  const double pressure = T * lnz;
  const double eps = T * T * (lnz_hi - lnz_lo) / (2.0 * dT);
  return ThermoPoint(T, pressure, eps);
}

std::vector<EosRow> eos_table(const std::vector<double>& temperatures,
                              const MassModels& models, const QuadratureRule& rule,
                              int workers) {
  std::vector<EosRow> rows(temperatures.size());
  workers = std::max(1, workers);
  const std::size_t chunk = (temperatures.size() + static_cast<std::size_t>(workers) - 1) /
                            static_cast<std::size_t>(workers);
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      const std::size_t lo = static_cast<std::size_t>(w) * chunk;
      const std::size_t hi = std::min(temperatures.size(), lo + chunk);
      for (std::size_t i = lo; i < hi; ++i) {
        const double t = temperatures[i];
        const ThermoPoint pt = eos_point(t, models, rule);
        const double t4 = t * t * t * t;
        rows[i] = {t, pt.P / t4, pt.eps / t4, pt.s / (t * t * t)};
      }
    });
  }
  for (auto& t : pool) t.join();
  return rows;
}

std::vector<EosRow> synthetic_target(double m_g, double m_ud, double m_s,
                                     double t_lo, double t_hi, int n,
                                     const QuadratureRule& rule) {
  if (n < 2 || !(t_lo > 0.0) || !(t_hi > t_lo))
    throw std::invalid_argument("synthetic_target: need n >= 2 and 0 < t_lo < t_hi");
  MassModels models{MassModel::constant(m_g), MassModel::constant(m_ud),
                    MassModel::constant(m_s)};
  std::vector<double> temps(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    temps[static_cast<std::size_t>(i)] = t_lo + (t_hi - t_lo) * i / (n - 1);
  return eos_table(temps, models, rule);
}

void write_eos_csv(const std::string& path, const std::vector<EosRow>& rows) {
  std::vector<std::vector<double>> data;
  for (const auto& r : rows)
    data.push_back({r.T, r.P_over_T4, r.eps_over_T4, r.s_over_T3});
  io::write_csv(path, {"T_GeV", "P_over_T4", "eps_over_T4", "s_over_T3"}, data);
}

std::vector<EosRow> read_eos_csv(const std::string& path) {
  const auto data = io::read_csv(path);
  std::vector<EosRow> rows;
  for (const auto& r : data) {
    if (r.size() != 4)
      throw FormatError("read_eos_csv: expected 4 columns, got " +
                        std::to_string(r.size()));
    rows.push_back({r[0], r[1], r[2], r[3]});
  }
  return rows;
}

namespace {

// One species' role in the fit: which lnZ and d(lnZ)/dm to call.
struct Species {
  int d;
  bool fermion;
  double lnz(double m, double T, const QuadratureRule& rule) const {
    return fermion ? lnz_fermion(m, T, d, rule) : lnz_boson(m, T, d, rule);
  }
  double dlnz_dm(double m, double T, const QuadratureRule& rule) const {
    return fermion ? dlnz_dm_fermion(m, T, d, rule) : dlnz_dm_boson(m, T, d, rule);
  }
};

// Minimal Adam / momentum-SGD over a flat parameter vector, mirroring the
// trainer's update rules.
struct Optimizer {
  nn::TrainConfig cfg;
  Eigen::VectorXd m, v;
  std::int64_t step = 0;

  explicit Optimizer(const nn::TrainConfig& cfg, Eigen::Index n) : cfg(cfg) {
    m = Eigen::VectorXd::Zero(n);
    v = Eigen::VectorXd::Zero(n);
  }
  void update(Eigen::VectorXd& theta, Eigen::VectorXd grad) {
    grad += cfg.weight_decay * theta;
    if (cfg.optimizer == nn::TrainConfig::Optimizer::Sgd) {
      m = cfg.momentum * m + grad;
      theta -= cfg.lr * m;
      return;
    }
    ++step;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    m = b1 * m + (1.0 - b1) * grad;
    v = b2 * v.array().matrix() + (1.0 - b2) * grad.array().square().matrix();
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step));
    theta -= (cfg.lr * (m / bc1).array() / ((v / bc2).array().sqrt() + eps)).matrix();
  }
};

}  // namespace

FitResult fit_mass_models(const std::vector<EosRow>& target, InputMode mode,
                          const nn::TrainConfig& train, double t_c) {
  if (target.size() < 5)
    throw std::invalid_argument("fit_mass_models: need >= 5 target rows");
  for (std::size_t i = 1; i < target.size(); ++i)
    if (target[i].T <= target[i - 1].T)
      throw std::invalid_argument("fit_mass_models: target T must ascend");

  const bool expanded = mode == InputMode::Expanded;
  const QuadratureRule rule = gauss_legendre(50);
  const Species species[3] = {{DofConstants::d_g, false},
                              {DofConstants::d_ud, true},
                              {DofConstants::d_s, true}};

  const std::int64_t rows = static_cast<std::int64_t>(target.size());
  const std::int64_t points = 3 * rows;  // (T - dT, T, T + dT) per row
  const int in_dim = expanded ? 2 : 1;

  // Shared evaluation batch for all three nets.
  Tensor batch({points, in_dim});
  std::vector<double> temps(static_cast<std::size_t>(points));
  std::vector<double> steps(static_cast<std::size_t>(rows));
  for (std::int64_t i = 0; i < rows; ++i) {
    const double t = target[static_cast<std::size_t>(i)].T;
    const double dt = t / 200.0;
    steps[static_cast<std::size_t>(i)] = dt;
    const double pts[3] = {t - dt, t, t + dt};
    for (int k = 0; k < 3; ++k) {
      const std::int64_t row = 3 * i + k;
      temps[static_cast<std::size_t>(row)] = pts[k];
      const auto in = expanded
                          ? expansion::expand_vector({pts[k]}, {t_c},
                                                     expansion::append_pattern(1, 1))
                          : std::vector<double>{pts[k]};
      for (int c = 0; c < in_dim; ++c) batch[row * in_dim + c] = in[static_cast<std::size_t>(c)];
    }
  }

  std::vector<std::shared_ptr<nn::Model>> nets;
  std::vector<Optimizer> opts;
  Prng root(train.seed);
  for (int sidx = 0; sidx < 3; ++sidx) {
    auto model = std::make_shared<nn::Model>(mass_mlp_spec(expanded));
    Prng init = root.substream(Prng::hash_string("mass_net"), static_cast<std::uint64_t>(sidx));
    model->init_params(init);
    opts.emplace_back(train, model->param_count());
    nets.push_back(std::move(model));
  }

  FitResult result;
  result.clamp_warnings = 0;

  // Masses at every evaluation point, and the resulting residuals.
  Eigen::MatrixXd masses(points, 3);
  std::vector<double> pred_p(static_cast<std::size_t>(rows));
  std::vector<double> pred_e(static_cast<std::size_t>(rows));

  auto evaluate = [&](bool want_grads, std::vector<Eigen::MatrixXd>* out_grads) {
    Prng fwd(0);
    for (int sidx = 0; sidx < 3; ++sidx) {
      const Eigen::MatrixXd out = nets[static_cast<std::size_t>(sidx)]->forward_raw(
          batch, nn::Mode::Eval, fwd);
      for (std::int64_t r = 0; r < points; ++r) {
        double mval = out(r, 0);
        if (mval < 0.0) {  // softplus keeps this non-negative; belt and braces
          mval = 0.0;
          ++result.clamp_warnings;
        }
        masses(r, sidx) = mval;
      }
    }
    // lnZ at every point, summed over species.
    Eigen::VectorXd lnz(points);
    for (std::int64_t r = 0; r < points; ++r) {
      const double t = temps[static_cast<std::size_t>(r)];
      double total = 0.0;
      for (int sidx = 0; sidx < 3; ++sidx)
        total += species[sidx].lnz(masses(r, sidx), t, rule);
      lnz(r) = total;
    }

    double loss = 0.0;
    std::vector<double> dl_dp(static_cast<std::size_t>(rows));
    std::vector<double> dl_de(static_cast<std::size_t>(rows));
    for (std::int64_t i = 0; i < rows; ++i) {
      const double t = target[static_cast<std::size_t>(i)].T;
      const double dt = steps[static_cast<std::size_t>(i)];
      const double t3 = t * t * t;
      const double p_hat = lnz(3 * i + 1) / t3;  // P/T^4 = lnZ/T^3
      const double e_hat = (lnz(3 * i + 2) - lnz(3 * i)) / (2.0 * dt * t * t);
      pred_p[static_cast<std::size_t>(i)] = p_hat;
      pred_e[static_cast<std::size_t>(i)] = e_hat;
      const double rp = p_hat - target[static_cast<std::size_t>(i)].P_over_T4;
      const double re = e_hat - target[static_cast<std::size_t>(i)].eps_over_T4;
      loss += rp * rp + re * re;
      dl_dp[static_cast<std::size_t>(i)] = 2.0 * rp / static_cast<double>(rows);
      dl_de[static_cast<std::size_t>(i)] = 2.0 * re / static_cast<double>(rows);
    }
    loss /= static_cast<double>(rows);
    if (!std::isfinite(loss))
      throw TrainingDiverged("fit_mass_models: non-finite loss",
                             static_cast<int>(result.loss_trace.size()));

    if (want_grads) {
      out_grads->clear();
      for (int sidx = 0; sidx < 3; ++sidx) {
        Eigen::MatrixXd og = Eigen::MatrixXd::Zero(points, 1);
        for (std::int64_t i = 0; i < rows; ++i) {
          const double t = target[static_cast<std::size_t>(i)].T;
          const double dt = steps[static_cast<std::size_t>(i)];
          const double t3 = t * t * t;
          // center point: through P/T^4
          {
            const std::int64_t r = 3 * i + 1;
            const double dldm = dl_dp[static_cast<std::size_t>(i)] / t3 *
                                species[sidx].dlnz_dm(masses(r, sidx),
                                                      temps[static_cast<std::size_t>(r)], rule);
            og(r, 0) += dldm;
          }
          // flank points: through eps/T^4 central difference
          for (int k : {0, 2}) {
            const std::int64_t r = 3 * i + k;
            const double sign = k == 2 ? 1.0 : -1.0;
            const double dldm = dl_de[static_cast<std::size_t>(i)] * sign /
                                (2.0 * dt * t * t) *
                                species[sidx].dlnz_dm(masses(r, sidx),
                                                      temps[static_cast<std::size_t>(r)], rule);
            og(r, 0) += dldm;
          }
        }
        out_grads->push_back(std::move(og));
      }
    }
    return loss;
  };

  for (int epoch = 0; epoch < train.epochs; ++epoch) {
    std::vector<Eigen::MatrixXd> out_grads;
    const double loss = evaluate(true, &out_grads);
    result.loss_trace.push_back(loss);
    for (int sidx = 0; sidx < 3; ++sidx) {
      // forward caches are per-net, so rerun the forward before backprop
      Prng fwd(0);
      nets[static_cast<std::size_t>(sidx)]->forward_raw(batch, nn::Mode::Eval, fwd);
      const Eigen::VectorXd grad =
          nets[static_cast<std::size_t>(sidx)]->backward_from_output_grad(
              out_grads[static_cast<std::size_t>(sidx)]);
      opts[static_cast<std::size_t>(sidx)].update(
          nets[static_cast<std::size_t>(sidx)]->params(), grad);
    }
  }
  evaluate(false, nullptr);

  result.models.m_g = MassModel::mlp(nets[0], expanded, t_c);
  result.models.m_ud = MassModel::mlp(nets[1], expanded, t_c);
  result.models.m_s = MassModel::mlp(nets[2], expanded, t_c);
  for (std::int64_t i = 0; i < rows; ++i) {
    result.temperatures.push_back(target[static_cast<std::size_t>(i)].T);
    result.mae_pressure.push_back(std::abs(
        pred_p[static_cast<std::size_t>(i)] - target[static_cast<std::size_t>(i)].P_over_T4));
    result.mae_energy.push_back(std::abs(
        pred_e[static_cast<std::size_t>(i)] - target[static_cast<std::size_t>(i)].eps_over_T4));
  }
  return result;
}

}  // namespace qcd
}  // namespace symlab
