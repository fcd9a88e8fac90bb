#include "timo/experiment.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

namespace timo {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 6> kProfileNames = {"phi0", "phi1", "psi0", "psi1", "theta0", "q0"};

Profile& profile(InitialData& d, std::size_t i) {
  switch (i) {
    case 0: return d.phi0;
    case 1: return d.phi1;
    case 2: return d.psi0;
    case 3: return d.psi1;
    case 4: return d.theta0;
    default: return d.q0;
  }
}

const Profile& profile(const InitialData& d, std::size_t i) { return profile(const_cast<InitialData&>(d), i); }

void check_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw std::invalid_argument("config: '" + std::string(where) + "' must be an object");
  const std::set<std::string_view> ok(allowed);
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) throw std::invalid_argument("config: unknown key '" + key + "' in " + std::string(where));
  }
}

template <typename T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

json physics_json(const PhysicalParams& p) {
  return {{"rho1", p.rho1}, {"rho2", p.rho2},   {"rho3", p.rho3}, {"b", p.b},
          {"k", p.k},       {"delta", p.delta}, {"beta", p.beta}, {"tau", p.tau},
          {"mu", p.mu},     {"damping", std::string(to_string(p.damping))}, {"T", p.T}};
}

void merge_physics(PhysicalParams& p, const json& j) {
  check_keys(j, "physics", {"rho1", "rho2", "rho3", "b", "k", "delta", "beta", "tau", "mu", "damping", "T"});
  take(j, "rho1", p.rho1);
  take(j, "rho2", p.rho2);
  take(j, "rho3", p.rho3);
  take(j, "b", p.b);
  take(j, "k", p.k);
  take(j, "delta", p.delta);
  take(j, "beta", p.beta);
  take(j, "tau", p.tau);
  take(j, "mu", p.mu);
  take(j, "T", p.T);
  if (j.contains("damping")) p.damping = parse_damping(j.at("damping").get<std::string>());
}

void merge_boundary(BoundarySpec& b, const json& j) {
  check_keys(j, "boundary", {"kind", "left", "right"});
  if (j.contains("kind")) b.kind = parse_boundary(j.at("kind").get<std::string>());
  take(j, "left", b.left);
  take(j, "right", b.right);
}

void merge_initial(InitialData& d, const json& j) {
  check_keys(j, "initial", {"phi0", "phi1", "psi0", "psi1", "theta0", "q0"});
  for (std::size_t i = 0; i < kProfileNames.size(); ++i) {
    const std::string key(kProfileNames[i]);
    if (!j.contains(key)) continue;
    const json& pj = j.at(key);
    check_keys(pj, key, {"amplitude", "offset"});
    take(pj, "amplitude", profile(d, i).amplitude);
    take(pj, "offset", profile(d, i).offset);
  }
}

PhysicalParams case2_params() {
  PhysicalParams p;
  p.rho1 = 2.0;
  p.rho2 = 2.0;
  p.k = 2.0;
  p.rho3 = 1.0;
  p.b = 1.0;
  p.beta = 1.0;
  p.delta = std::sqrt(2.0 / 3.0);
  p.tau = 3.0;
  p.mu = 0.0;
  p.damping = DampingKind::None;
  p.T = 30.0;
  return p;
}

void write_file(const std::filesystem::path& path, const auto& writer) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  writer(os);
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace

void ExperimentConfig::validate() const {
  train.validate();
  if (grid_nx < 2 || grid_nt < 2) throw std::invalid_argument("grid_nx and grid_nt must be at least 2");
  if (!(t_cut_fraction >= 0.0 && t_cut_fraction < 1.0)) {
    throw std::invalid_argument("t_cut_fraction must lie in [0, 1)");
  }
  if (output_dir.empty()) throw std::invalid_argument("output_dir must not be empty");
}

json to_json(const ExperimentConfig& cfg) {
  const TrainConfig& tc = cfg.train;
  json initial = json::object();
  for (std::size_t i = 0; i < kProfileNames.size(); ++i) {
    const Profile& pr = profile(tc.initial, i);
    initial[std::string(kProfileNames[i])] = {{"amplitude", pr.amplitude}, {"offset", pr.offset}};
  }
  return {
      {"preset", cfg.preset},
      {"epochs", tc.epochs},
      {"collocation",
       {{"interior", tc.collocation.interior}, {"boundary", tc.collocation.boundary}, {"initial", tc.collocation.initial}}},
      {"seed", tc.seed},
      {"layers", tc.layers.sizes},
      {"physics", physics_json(tc.physics)},
      {"boundary",
       {{"kind", std::string(to_string(tc.boundary.kind))}, {"left", tc.boundary.left}, {"right", tc.boundary.right}}},
      {"initial", initial},
      {"use_sources", tc.use_sources},
      {"paper_literal_aggregation", tc.paper_literal_aggregation},
      {"log_every", tc.log_every},
      {"adam", {{"lr", tc.adam.lr}, {"beta1", tc.adam.beta1}, {"beta2", tc.adam.beta2}, {"eps", tc.adam.eps}}},
      {"chunk_size", tc.chunk_size},
      {"grid", {{"nx", cfg.grid_nx}, {"nt", cfg.grid_nt}}},
      {"t_cut_fraction", cfg.t_cut_fraction},
      {"output_dir", cfg.output_dir.string()},
  };
}

ExperimentConfig merge_json(ExperimentConfig cfg, const json& j) {
  check_keys(j, "config",
             {"preset", "epochs", "collocation", "seed", "layers", "physics", "boundary", "initial", "use_sources",
              "paper_literal_aggregation", "log_every", "adam", "chunk_size", "grid", "t_cut_fraction", "output_dir"});
  try {
    TrainConfig& tc = cfg.train;
    take(j, "preset", cfg.preset);
    take(j, "epochs", tc.epochs);
    if (j.contains("collocation")) {
      const json& c = j.at("collocation");
      if (c.is_number_unsigned()) {
        const auto n = c.get<std::size_t>();
        tc.collocation = {n, n, n};
      } else {
        check_keys(c, "collocation", {"interior", "boundary", "initial"});
        take(c, "interior", tc.collocation.interior);
        take(c, "boundary", tc.collocation.boundary);
        take(c, "initial", tc.collocation.initial);
      }
    }
    take(j, "seed", tc.seed);
    take(j, "layers", tc.layers.sizes);
    if (j.contains("physics")) merge_physics(tc.physics, j.at("physics"));
    if (j.contains("boundary")) merge_boundary(tc.boundary, j.at("boundary"));
    if (j.contains("initial")) merge_initial(tc.initial, j.at("initial"));
    take(j, "use_sources", tc.use_sources);
    take(j, "paper_literal_aggregation", tc.paper_literal_aggregation);
    take(j, "log_every", tc.log_every);
    if (j.contains("adam")) {
      const json& a = j.at("adam");
      check_keys(a, "adam", {"lr", "beta1", "beta2", "eps"});
      take(a, "lr", tc.adam.lr);
      take(a, "beta1", tc.adam.beta1);
      take(a, "beta2", tc.adam.beta2);
      take(a, "eps", tc.adam.eps);
    }
    take(j, "chunk_size", tc.chunk_size);
    if (j.contains("grid")) {
      const json& g = j.at("grid");
      check_keys(g, "grid", {"nx", "nt"});
      take(g, "nx", cfg.grid_nx);
      take(g, "nt", cfg.grid_nt);
    }
    take(j, "t_cut_fraction", cfg.t_cut_fraction);
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  return cfg;
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig base;
  if (j.is_object() && j.contains("preset")) base = make_preset(j.at("preset").get<std::string>());
  return merge_json(std::move(base), j);
}

const std::vector<PresetInfo>& preset_catalog() {
  static const std::vector<PresetInfo> catalog = {
      {"manufactured", "exact solution 4e^t x(1-x) with forcing; unit constants, linear damping mu=1, T=1, 10000 epochs"},
      {"case1", "undamped, chi != 0: rho2=2, other constants 1, T=40, 8000 epochs"},
      {"case2", "undamped, chi = 0: rho1=rho2=k=2, rho3=b=beta=1, delta=sqrt(2/3), tau=3, T=30, 8000 epochs"},
      {"linear-damped", "case2 constants with mu*psi_t, mu=1"},
      {"quadratic-damped", "case2 constants with mu*psi_t^2, mu=1"},
      {"singular-damped", "case2 constants with (mu/psi_t) exp(-1/psi_t^2), mu=1"},
  };
  return catalog;
}

ExperimentConfig make_preset(std::string_view name) {
  ExperimentConfig cfg;
  cfg.preset = std::string(name);
  TrainConfig& tc = cfg.train;
  tc.boundary.kind = BoundaryKind::DirichletAll;
  if (name == "manufactured") {
    tc.physics = PhysicalParams{};
    tc.physics.mu = 1.0;
    tc.physics.damping = DampingKind::Linear;
    tc.physics.T = 1.0;
    tc.use_sources = true;
    tc.epochs = 10000;
  } else if (name == "case1") {
    tc.physics = PhysicalParams{};
    tc.physics.rho2 = 2.0;
    tc.physics.T = 40.0;
    tc.epochs = 8000;
  } else if (name == "case2") {
    tc.physics = case2_params();
    tc.epochs = 8000;
  } else if (name == "linear-damped" || name == "quadratic-damped" || name == "singular-damped") {
    tc.physics = case2_params();
    tc.physics.mu = 1.0;
    tc.physics.damping = name == "linear-damped"      ? DampingKind::Linear
                         : name == "quadratic-damped" ? DampingKind::Quadratic
                                                      : DampingKind::SingularExp;
    tc.epochs = 8000;
  } else {
    std::string names;
    for (const PresetInfo& p : preset_catalog()) names += (names.empty() ? "" : ", ") + p.name;
    throw std::invalid_argument("unknown preset '" + std::string(name) + "'; valid presets: " + names);
  }
  return cfg;
}

json make_manifest(const ExperimentConfig& cfg) {
  const TrainConfig& tc = cfg.train;
  json m;
  m["config"] = to_json(cfg);
  m["chi"] = stability_number(tc.physics);
  m["seeds"] = {{"init", tc.init_seed()}, {"sampling", tc.sampling_seed()}};
  m["rng"] = "std::mt19937_64; u = (r >> 11) * 2^-53; open-interval rejection";
  m["init"] = "glorot_uniform weights, zero biases";
  m["activation"] = "tanh hidden, linear output";
  m["param_count"] = tc.layers.param_count();
  m["t_cut"] = cfg.t_cut();
  m["loss_normalizer"] = "number of points per term group";
  m["e_inf_window"] = "mean of last 10% of energy samples";
  return m;
}

DiagnosticsResult write_diagnostics(const NetworkParams& params, const ExperimentConfig& cfg) {
  const EvalGrid grid = cfg.grid();
  const FieldGrid fields = sample_network(params, grid);
  DiagnosticsResult r;
  r.energy = discrete_energy(grid, fields, cfg.train.physics);
  r.fits = classify_decay(r.energy, cfg.t_cut());
  if (cfg.has_exact_solution()) {
    const FieldGrid exact = sample_fields(exact_solution, grid);
    r.errors = l2_error_series(fields, exact, grid);
    for (std::size_t k = 0; k < 4; ++k) r.relative_error[k] = relative_error(fields.field(k), exact.field(k));
  }
  std::filesystem::create_directories(cfg.output_dir);
  write_file(cfg.output_dir / "energy.csv", [&](std::ostream& os) { write_energy_csv(os, r.energy); });
  write_file(cfg.output_dir / "fits.json", [&](std::ostream& os) { write_fits_json(os, r.fits, cfg.t_cut()); });
  if (cfg.has_exact_solution()) {
    write_file(cfg.output_dir / "errors.csv",
               [&](std::ostream& os) { write_errors_csv(os, r.errors, r.relative_error); });
  }
  return r;
}

RunOutcome run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  std::filesystem::create_directories(cfg.output_dir);
  write_file(cfg.output_dir / "manifest.json", [&](std::ostream& os) { os << make_manifest(cfg).dump(2) << '\n'; });

  RunOutcome out;
  try {
    out.train = train(cfg.train, progress);
  } catch (const TrainingAborted& e) {
    write_file(cfg.output_dir / "checkpoint.json", [&](std::ostream& os) {
      write_checkpoint(os, Checkpoint{e.last_good(), cfg.train.seed, e.epoch()});
    });
    write_file(cfg.output_dir / "loss_history.csv",
               [&](std::ostream& os) { write_loss_history_csv(os, e.history()); });
    throw;
  }
  write_file(cfg.output_dir / "checkpoint.json", [&](std::ostream& os) {
    write_checkpoint(os, Checkpoint{out.train.params, cfg.train.seed, cfg.train.epochs});
  });
  write_file(cfg.output_dir / "loss_history.csv",
             [&](std::ostream& os) { write_loss_history_csv(os, out.train.history); });
  out.diagnostics = write_diagnostics(out.train.params, cfg);
  return out;
}

DiagnosticsResult analyze_checkpoint(const std::filesystem::path& checkpoint, const ExperimentConfig& cfg) {
  cfg.validate();
  std::ifstream is(checkpoint);
  if (!is) throw std::runtime_error("cannot open checkpoint " + checkpoint.string());
  const Checkpoint ckpt = read_checkpoint(is);
  if (!(ckpt.params.spec() == cfg.train.layers)) {
    throw std::invalid_argument("checkpoint architecture does not match the configured layer sizes");
  }
  return write_diagnostics(ckpt.params, cfg);
}

}  // namespace timo
