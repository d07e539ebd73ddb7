#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "symlab/datasets.hpp"
#include "symlab/errors.hpp"
#include "symlab/expansion.hpp"
#include "symlab/io.hpp"
#include "symlab/ising.hpp"
#include "symlab/landscape.hpp"
#include "symlab/qcd.hpp"
#include "symlab/replica.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace symlab;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitFormat = 3;
constexpr int kExitNumerical = 4;

struct CommonOpts {
  std::string config_path;
  std::uint64_t seed = 1;
  bool seed_set = false;
  int workers = 0;  // 0 = resolve from env / default
  std::string out_dir = "out";
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "JSON run config");
  cmd->add_option("--seed", opts.seed, "global seed")->each([&](const std::string&) {
    opts.seed_set = true;
  });
  cmd->add_option("--workers", opts.workers, "worker thread count");
  cmd->add_option("--out", opts.out_dir, "output directory");
}

int resolve_workers(int flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("SYMLAB_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

json load_config(const CommonOpts& opts, const std::vector<std::string>& known_keys) {
  json cfg = json::object();
  if (!opts.config_path.empty()) {
    std::ifstream in(opts.config_path);
    if (!in) throw FormatError("cannot open config: " + opts.config_path);
    try {
      in >> cfg;
    } catch (const json::parse_error& e) {
      throw FormatError(std::string("config parse error: ") + e.what());
    }
    if (!cfg.is_object()) throw FormatError("config must be a JSON object");
  }
  for (const auto& [key, _] : cfg.items()) {
    if (std::find(known_keys.begin(), known_keys.end(), key) == known_keys.end())
      throw std::invalid_argument("unknown config key: " + key);
  }
  return cfg;
}

void write_snapshot(const fs::path& out_dir, const std::string& command,
                    const json& resolved) {
  fs::create_directories(out_dir);
  std::ofstream out(out_dir / (command + "-config.json"));
  out << resolved.dump(2) << "\n";
}

// --- ising ---

int run_ising(const CommonOpts& opts) {
  json cfg = load_config(opts, {"L", "count", "J", "fields", "seed"});
  const int L = cfg.value("L", 5);
  const std::int64_t count = cfg.value("count", std::int64_t{1000});
  const double j_coupling = cfg.value("J", 1.0);
  std::vector<double> fields = cfg.value("fields", std::vector<double>{0.0, 0.45});
  const std::uint64_t seed = opts.seed_set ? opts.seed : cfg.value("seed", std::uint64_t{1});
  if (L < 2) throw std::invalid_argument("ising: L must be >= 2");
  if (count < 1) throw std::invalid_argument("ising: count must be >= 1");

  const fs::path out_dir(opts.out_dir);
  fs::create_directories(out_dir);
  json resolved = {{"L", L}, {"count", count}, {"J", j_coupling},
                   {"fields", fields}, {"seed", seed}};
  write_snapshot(out_dir, "ising", resolved);

  for (double h : fields) {
    Prng prng(seed);
    const auto entries = ising::energy_landscape(L, count, {j_coupling, h}, prng);
    std::vector<std::vector<double>> rows;
    for (const auto& e : entries)
      rows.push_back({e.energy, static_cast<double>(e.magnetization),
                      static_cast<double>(e.config_id)});
    std::ostringstream name;
    name << "ising_h" << h << ".csv";
    io::write_csv((out_dir / name.str()).string(),
                  {"energy", "magnetization", "config_id"}, rows);
  }
  std::cout << "wrote " << fields.size() << " landscape CSVs to " << out_dir << "\n";
  return 0;
}

// --- expand ---

int run_expand(const CommonOpts& opts, const std::string& input,
               const std::string& output, int factor, const std::string& fill,
               int first_kernel) {
  if (factor < 1) throw std::invalid_argument("expand: factor must be >= 1");
  expansion::ExpansionConfig cfg;
  cfg.factor = factor;
  if (fill == "random")
    cfg.fill = expansion::FillSpec::random_normal();
  else
    cfg.fill = expansion::FillSpec::constant(std::stod(fill));
  if (first_kernel > 0) cfg.first_kernel_size = first_kernel;

  if (expansion::validate_factor(cfg) == expansion::FactorValidity::Warning)
    std::cerr << "warning: factor " << factor << " exceeds first kernel size "
              << first_kernel << "; kernels can land on fill values only\n";

  const Tensor img = io::load_tensor(input);
  Prng prng(opts.seed);
  const Tensor expanded = expansion::expand_image(img, cfg, prng);
  io::save_tensor(expanded, output);

  const fs::path out_dir = fs::path(output).has_parent_path()
                               ? fs::path(output).parent_path()
                               : fs::path(".");
  json resolved = {{"input", input}, {"output", output}, {"factor", factor},
                   {"fill", fill}, {"seed", opts.seed}};
  if (first_kernel > 0) resolved["first_kernel"] = first_kernel;
  write_snapshot(out_dir, "expand", resolved);
  std::cout << "wrote " << shape_string(expanded.shape()) << " tensor to " << output << "\n";
  return 0;
}

// --- enumerate ---

void write_landscape(const fs::path& out_dir, const landscape::LossLandscape& ls) {
  std::vector<std::vector<double>> rows;
  for (const auto& g : ls.groups)
    rows.push_back({g.loss, static_cast<double>(g.multiplicity)});
  io::write_csv((out_dir / (ls.spec_id + "_landscape.csv")).string(),
                {"loss", "multiplicity"}, rows);
  const auto profile = landscape::degeneracy_profile(ls);
  json pj = {{"spec", ls.spec_id},
             {"dataset", ls.dataset_id},
             {"configs", ls.config_count},
             {"distinct_levels", profile.distinct_levels},
             {"max_multiplicity", profile.max_multiplicity},
             {"plateau_fraction", profile.plateau_fraction},
             {"min_loss", ls.losses.back()},
             {"max_loss", ls.losses.front()}};
  std::ofstream out(out_dir / (ls.spec_id + "_profile.json"));
  out << pj.dump(2) << "\n";
}

int run_enumerate(const CommonOpts& opts) {
  json cfg = load_config(opts, {"family", "tol", "grid_size", "bias", "seed"});
  const std::string family = cfg.value("family", std::string("scalar"));
  const double tol = cfg.value("tol", 1e-9);
  const int grid = cfg.value("grid_size", 64);
  const bool bias = cfg.value("bias", false);
  const std::uint64_t seed = opts.seed_set ? opts.seed : cfg.value("seed", std::uint64_t{1});
  const int workers = resolve_workers(opts.workers);

  const fs::path out_dir(opts.out_dir);
  fs::create_directories(out_dir);
  json resolved = {{"family", family}, {"tol", tol}, {"grid_size", grid},
                   {"bias", bias},     {"seed", seed}, {"workers", workers}};
  write_snapshot(out_dir, "enumerate", resolved);

  if (family == "scalar") {
    const auto data = datasets::gen_scalar_dataset(grid);
    landscape::ScalarNetSpec raw{landscape::ScalarVariant::Raw, bias};
    landscape::ScalarNetSpec exp{landscape::ScalarVariant::Expanded, bias};
    const auto ls_raw = landscape::enumerate_scalar(raw, data, tol, workers);
    const auto ls_exp = landscape::enumerate_scalar(exp, data, tol, workers);
    write_landscape(out_dir, ls_raw);
    write_landscape(out_dir, ls_exp);
    const auto cmp = landscape::compare_landscapes(ls_raw, ls_exp);
    json cj = {{"a", ls_raw.spec_id},
               {"b", ls_exp.spec_id},
               {"min_loss_a", cmp.min_loss_a},
               {"min_loss_b", cmp.min_loss_b},
               {"distinct_a", cmp.distinct_a},
               {"distinct_b", cmp.distinct_b},
               {"plateau_a", cmp.plateau_a},
               {"plateau_b", cmp.plateau_b}};
    std::ofstream out(out_dir / "scalar_comparison.json");
    out << cj.dump(2) << "\n";
    std::cout << "wrote 2 landscapes + comparison to " << out_dir << "\n";
    return 0;
  }
  if (family == "convnet") {
    const auto data = datasets::gen_2x2_dataset();
    for (auto variant : {landscape::ConvVariant::Baseline, landscape::ConvVariant::Dropout,
                         landscape::ConvVariant::Batchnorm, landscape::ConvVariant::Equivariant,
                         landscape::ConvVariant::WrongEquivariant}) {
      landscape::ConvNet2x2Spec spec;
      spec.variant = variant;
      spec.seed = seed;
      write_landscape(out_dir, landscape::enumerate_convnet(spec, data, tol, workers));
    }
    std::cout << "wrote 5 landscapes to " << out_dir << "\n";
    return 0;
  }
  throw std::invalid_argument("enumerate: unknown family '" + family + "'");
}

// --- replica ---

std::uint64_t spec_hash(const json& j) { return Prng::hash_string(j.dump()); }

int run_replica(const CommonOpts& opts) {
  json cfg = load_config(opts, {"preset", "archs", "bars", "cifar_path", "cifar_count",
                                "epochs", "replicas", "seed"});
  const std::string preset = cfg.value("preset", std::string("desk"));
  std::vector<std::string> archs = cfg.value(
      "archs", std::vector<std::string>{"simple_cnn", "dropout_cnn", "batchnorm_cnn",
                                        "flip_equivariance_cnn", "rotation_equivariance_cnn"});
  const std::uint64_t seed = opts.seed_set ? opts.seed : cfg.value("seed", std::uint64_t{1});
  const int workers = resolve_workers(opts.workers);

  const fs::path out_dir(opts.out_dir);
  fs::create_directories(out_dir);

  std::vector<replica::ReplicaRunSpec> specs;
  for (const auto& name : archs) {
    auto arch = replica::arch_from_name(name);
    auto spec = preset == "full" ? replica::ReplicaRunSpec::full(arch, seed)
                                 : replica::ReplicaRunSpec::desk(arch, seed);
    if (cfg.contains("bars")) spec.dataset = replica::DataSpec::bars(cfg["bars"].get<int>());
    if (cfg.contains("cifar_path"))
      spec.dataset = replica::DataSpec::cifar10_subset(cfg["cifar_path"].get<std::string>(),
                                                       cfg.value("cifar_count", 200));
    if (cfg.contains("epochs")) spec.train.epochs = cfg["epochs"].get<int>();
    if (cfg.contains("replicas")) {
      spec.seeds.clear();
      for (int r = 0; r < cfg["replicas"].get<int>(); ++r)
        spec.seeds.push_back(seed + static_cast<std::uint64_t>(r));
    }
    specs.push_back(std::move(spec));
  }

  json resolved = {{"preset", preset}, {"archs", archs}, {"seed", seed},
                   {"workers", workers}, {"dataset", specs[0].dataset.id()},
                   {"epochs", specs[0].train.epochs},
                   {"replicas", specs[0].seeds.size()}};
  write_snapshot(out_dir, "replica", resolved);

  std::vector<std::pair<double, json>> table;  // metric_mean, row
  for (const auto& spec : specs) {
    // Replica weights are cached per spec hash; a rerun with the same spec
    // skips training.
    json key = {{"arch", replica::arch_name(spec.arch)},
                {"dataset", spec.dataset.id()},
                {"epochs", spec.train.epochs},
                {"lr", spec.train.lr},
                {"seeds", spec.seeds}};
    const std::uint64_t hash = spec_hash(key);
    std::ostringstream cache_name;
    cache_name << "weights_" << replica::arch_name(spec.arch) << "_" << std::hex << hash
               << ".bin";
    const fs::path cache = out_dir / cache_name.str();

    Eigen::MatrixXd weights;
    double mean_acc = -1.0;
    if (fs::exists(cache)) {
      weights = io::load_matrix(cache.string());
      std::cout << "reusing cached weights for " << replica::arch_name(spec.arch) << "\n";
    } else {
      auto trained = replica::train_replicas(spec, workers);
      for (const auto& f : trained.failures)
        std::cerr << "warning: replica seed " << f.seed << " diverged: " << f.message << "\n";
      weights = trained.weights;
      mean_acc = trained.mean_accuracy;
      io::save_matrix(weights, cache.string());
    }

    auto report = replica::symmetry_metric(weights, spec.reduce_dim, spec.bins,
                                           spec.sigma_bins);
    report.arch = replica::arch_name(spec.arch);
    json rj = {{"arch", report.arch},
               {"metric_mean", report.metric_mean},
               {"metric_peak", report.metric_peak},
               {"distances", report.distances},
               {"bin_centers", report.curve.bin_centers},
               {"density", report.curve.density},
               {"spec_hash", hash}};
    if (mean_acc >= 0.0) rj["mean_eval_accuracy"] = mean_acc;
    std::ofstream rout(out_dir / ("report_" + report.arch + ".json"));
    rout << rj.dump(2) << "\n";
    table.emplace_back(report.metric_mean,
                       json{{"arch", report.arch},
                            {"metric_mean", report.metric_mean},
                            {"metric_peak", report.metric_peak}});
  }
  std::stable_sort(table.begin(), table.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  json cmp = json::array();
  for (auto& [_, row] : table) cmp.push_back(row);
  std::ofstream cout_file(out_dir / "comparison.json");
  cout_file << cmp.dump(2) << "\n";
  std::cout << "wrote " << specs.size() << " reports + comparison to " << out_dir << "\n";
  return 0;
}

// --- qcd ---

int run_qcd(const CommonOpts& opts) {
  json cfg = load_config(opts, {"mode", "m_g", "m_ud", "m_s", "t_lo", "t_hi", "points",
                                "target_csv", "epochs", "lr", "t_c", "nodes", "seed"});
  const std::string mode = cfg.value("mode", std::string("eos"));
  const int nodes = cfg.value("nodes", 50);
  const std::uint64_t seed = opts.seed_set ? opts.seed : cfg.value("seed", std::uint64_t{1});
  const int workers = resolve_workers(opts.workers);
  const auto rule = gauss_legendre(nodes);

  const fs::path out_dir(opts.out_dir);
  fs::create_directories(out_dir);

  if (mode == "eos") {
    const double m_g = cfg.value("m_g", 0.6);
    const double m_ud = cfg.value("m_ud", 0.3);
    const double m_s = cfg.value("m_s", 0.4);
    const double t_lo = cfg.value("t_lo", 0.1);
    const double t_hi = cfg.value("t_hi", 0.5);
    const int n = cfg.value("points", 50);
    json resolved = {{"mode", mode}, {"m_g", m_g}, {"m_ud", m_ud}, {"m_s", m_s},
                     {"t_lo", t_lo}, {"t_hi", t_hi}, {"points", n}, {"nodes", nodes},
                     {"workers", workers}};
    write_snapshot(out_dir, "qcd", resolved);
    const auto rows = qcd::synthetic_target(m_g, m_ud, m_s, t_lo, t_hi, n, rule);
    qcd::write_eos_csv((out_dir / "eos.csv").string(), rows);
    std::cout << "wrote " << rows.size() << "-row EoS table to " << out_dir << "\n";
    return 0;
  }
  if (mode == "fit") {
    if (!cfg.contains("target_csv"))
      throw std::invalid_argument("qcd fit: target_csv is required");
    const std::string target_path = cfg["target_csv"].get<std::string>();
    if (!fs::exists(target_path))
      throw FormatError("qcd fit: target CSV not found: " + target_path);
    const auto target = qcd::read_eos_csv(target_path);

    nn::TrainConfig train;
    train.optimizer = nn::TrainConfig::Optimizer::Adam;
    train.lr = cfg.value("lr", 1e-2);
    train.epochs = cfg.value("epochs", 500);
    train.seed = seed;
    const double t_c = cfg.value("t_c", qcd::kCriticalTemperature);

    json resolved = {{"mode", mode}, {"target_csv", target_path}, {"epochs", train.epochs},
                     {"lr", train.lr}, {"t_c", t_c}, {"seed", seed}, {"nodes", nodes}};
    write_snapshot(out_dir, "qcd", resolved);

    json report;
    for (auto [name, m] : {std::pair<std::string, qcd::InputMode>{"raw", qcd::InputMode::Raw},
                           {"expanded", qcd::InputMode::Expanded}}) {
      const auto fit = qcd::fit_mass_models(target, m, train, t_c);
      report[name] = {{"temperatures", fit.temperatures},
                      {"mae_pressure", fit.mae_pressure},
                      {"mae_energy", fit.mae_energy},
                      {"final_loss", fit.loss_trace.empty() ? -1.0 : fit.loss_trace.back()},
                      {"clamp_warnings", fit.clamp_warnings}};
    }
    std::ofstream out(out_dir / "fit_report.json");
    out << report.dump(2) << "\n";
    std::cout << "wrote paired fit report to " << out_dir << "\n";
    return 0;
  }
  throw std::invalid_argument("qcd: unknown mode '" + mode + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"symlab: symmetry-breaking numerical laboratory"};
  app.require_subcommand(1);

  CommonOpts ising_opts, expand_opts, enum_opts, replica_opts, qcd_opts;
  auto* c_ising = app.add_subcommand("ising", "sampled Ising energy landscapes");
  add_common(c_ising, ising_opts);

  auto* c_expand = app.add_subcommand("expand", "input-dimension expansion of a tensor file");
  add_common(c_expand, expand_opts);
  std::string ex_input, ex_output, ex_fill = "0.5";
  int ex_factor = 2, ex_kernel = 0;
  c_expand->add_option("--input", ex_input, "input tensor")->required();
  c_expand->add_option("--output", ex_output, "output tensor")->required();
  c_expand->add_option("--factor", ex_factor, "expansion factor K");
  c_expand->add_option("--fill", ex_fill, "fill: value or 'random'");
  c_expand->add_option("--first-kernel", ex_kernel, "first conv kernel size (for validation)");

  auto* c_enum = app.add_subcommand("enumerate", "exhaustive sign-weight loss landscapes");
  add_common(c_enum, enum_opts);

  auto* c_replica = app.add_subcommand("replica", "replica-distance symmetry metric");
  add_common(c_replica, replica_opts);

  auto* c_qcd = app.add_subcommand("qcd", "quasi-particle equation of state");
  add_common(c_qcd, qcd_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_ising->parsed()) return run_ising(ising_opts);
    if (c_expand->parsed())
      return run_expand(expand_opts, ex_input, ex_output, ex_factor, ex_fill, ex_kernel);
    if (c_enum->parsed()) return run_enumerate(enum_opts);
    if (c_replica->parsed()) return run_replica(replica_opts);
    if (c_qcd->parsed()) return run_qcd(qcd_opts);
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kExitFormat;
  } catch (const TrainingDiverged& e) {
    std::cerr << "numerical error: " << e.what() << " (epoch " << e.epoch << ")\n";
    return kExitNumerical;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitUsage;
}
