// tensorart command-line interface: simulate / fit / irf / summarize.

#include <CLI11.hpp>
#include <atomic>
#include <csignal>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <thread>
#include <vector>

#include "tensorart/art_model.hpp"
#include "tensorart/gibbs.hpp"
#include "tensorart/io.hpp"
#include "tensorart/irf.hpp"

namespace fs = std::filesystem;
using namespace tensorart;

namespace {

std::atomic<bool> g_abort{false};

void handle_sigint(int) { g_abort.store(true); }

int worker_cap(int chains) {
  int cap = static_cast<int>(std::thread::hardware_concurrency());
  if (cap < 1) cap = 1;
  if (const char* env = std::getenv("TENSORART_THREADS")) {
    const int requested = std::atoi(env);
    if (requested >= 1) cap = requested;
  }
  return std::min(cap, chains);
}

ArtModel generate_stable_model(const RunConfig& config, Rng& rng) {
  const auto& sim = config.simulate;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    ArtModel model = ArtModel::zero(config.dims, config.p);
    for (auto& coeff : model.coeffs) {
      ParafacCoefficient c;
      std::vector<Index> gd = config.dims;
      gd.push_back(product_of(config.dims));
      for (Index r = 0; r < config.rank; ++r) {
        std::vector<Vector> group;
        for (Index d : gd) {
          Vector v(d);
          for (Index i = 0; i < d; ++i) v[i] = rng.normal();
          group.push_back(std::move(v));
        }
        c.marginals.push_back(std::move(group));
      }
      coeff = Tensor(coeff.dims(), reconstruct(c).flat());
    }
    const double rho = check_stationarity(model).rho;
    if (!std::isfinite(rho) || rho <= 0.0) continue;
    const double target = sim.rho_max * (0.5 + 0.45 * rng.uniform());
    for (auto& coeff : model.coeffs) coeff *= target / rho;

    for (std::size_t j = 0; j < model.covs.size(); ++j) {
      const Index d = config.dims[j];
      Matrix base = (1.0 - sim.noise_correlation) * Matrix::Identity(d, d) +
                    sim.noise_correlation * Matrix::Ones(d, d);
      model.covs[j] = sim.noise_scale * sim.noise_scale * base;
    }
    const double check = check_stationarity(model).rho;
    if (check < sim.rho_max) return model;
  }
  throw NumericalError("simulate: no stable model found within 1000 attempts");
}

int command_simulate(const RunConfig& config, bool quiet) {
  Rng root(config.sampler.seed);
  Rng model_rng = root.child(0x6d6f64656c);  // "model"
  Rng path_rng = root.child(0x73696d);       // "sim"

  ArtModel model = generate_stable_model(config, model_rng);
  const double rho = check_stationarity(model).rho;
  TensorSeries series = simulate(model, config.simulate.T, path_rng, std::nullopt, 100);

  const fs::path out(config.out_dir);
  const fs::path data_path =
      out / (config.data_format == SeriesFormat::csv_long ? "data.csv" : "data.ndjson");
  atomic_write_text(data_path, config.data_format == SeriesFormat::csv_long
                                   ? series_to_csv(series)
                                   : series_to_ndjson(series));
  save_model(out / "model.json", model);
  if (!quiet)
    std::cout << "simulated T=" << config.simulate.T << " dims I*=" << model.state_size()
              << " rho=" << rho << " -> " << data_path.string() << "\n";
  return 0;
}

Trace fit_single_chain(const TensorSeries& series, const RunConfig& config, int chain) {
  SamplerControls controls = config.sampler;
  controls.seed = Rng(config.sampler.seed).child(static_cast<std::uint64_t>(chain)).seed();
  return run_sampler(series, config.prior, controls, &g_abort);
}

int command_fit(const RunConfig& config, bool quiet) {
  if (config.data_path.empty()) throw ValidationError("fit: io.data path required");
  if (config.p != 1) throw ValidationError("fit: the estimation path covers lag order p = 1");
  TensorSeries series = load_tensor_series(config.data_path, config.data_format, config.dims);
  if (static_cast<Index>(series.obs.size()) < 2)
    throw ValidationError("fit: need at least two observations");

  const int chains = config.chains;
  std::vector<Trace> traces(static_cast<std::size_t>(chains));
  std::vector<std::exception_ptr> failures(static_cast<std::size_t>(chains));
  const int workers = worker_cap(chains);
  std::atomic<int> next{0};
  auto work = [&]() {
    for (;;) {
      const int c = next.fetch_add(1);
      if (c >= chains) return;
      try {
        traces[static_cast<std::size_t>(c)] = fit_single_chain(series, config, c);
      } catch (...) {
        failures[static_cast<std::size_t>(c)] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);

  const fs::path out(config.out_dir);
  for (int c = 0; c < chains; ++c) {
    const fs::path path = out / ("trace_chain" + std::to_string(c) + ".ndjson");
    save_trace(path, traces[static_cast<std::size_t>(c)]);
    if (!quiet)
      std::cout << "chain " << c << ": " << traces[static_cast<std::size_t>(c)].draws.size()
                << " draws -> " << path.string() << "\n";
  }

  // pooled summary across chains
  Trace pooled = traces[0];
  for (int c = 1; c < chains; ++c)
    pooled.draws.insert(pooled.draws.end(), traces[static_cast<std::size_t>(c)].draws.begin(),
                        traces[static_cast<std::size_t>(c)].draws.end());
  PosteriorSummary summary = posterior_summary(pooled);
  atomic_write_text(out / "summary.json", summary_to_json(summary, pooled).dump(2) + "\n");
  if (!quiet)
    std::cout << "rho(posterior mean) = " << summary.rho_of_mean << " -> "
              << (out / "summary.json").string() << "\n";
  return 0;
}

int command_irf(const RunConfig& config, bool quiet) {
  if (!config.irf) throw ValidationError("irf: config has no irf section");
  const IrfConfig& irf_cfg = *config.irf;
  fs::path trace_path = irf_cfg.trace_path.empty()
                            ? fs::path(config.out_dir) / "trace_chain0.ndjson"
                            : fs::path(irf_cfg.trace_path);
  Trace trace = load_trace(trace_path);
  if (trace.dims != config.dims)
    throw ValidationError("irf: trace dims do not match config dims");

  ShockSpec shock;
  for (const auto& multi : irf_cfg.targets) shock.targets.push_back(config.flat_target(multi));
  shock.delta = irf_cfg.delta;

  std::vector<IrfSummary> summaries;
  for (IrfMethod method : irf_cfg.methods)
    summaries.push_back(irf_summarize_over_trace(trace, shock, irf_cfg.horizon, method));

  const fs::path out = fs::path(config.out_dir) / "irf.csv";
  atomic_write_text(out, irf_grid_to_csv(summaries, config.dims, irf_cfg.horizon));
  if (!quiet)
    std::cout << "irf grid: " << summaries.size() << " method(s), horizon " << irf_cfg.horizon
              << " -> " << out.string() << "\n";
  return 0;
}

int command_summarize(const RunConfig& config, const std::string& trace_arg, bool quiet) {
  fs::path trace_path = trace_arg.empty() ? fs::path(config.out_dir) / "trace_chain0.ndjson"
                                          : fs::path(trace_arg);
  Trace trace = load_trace(trace_path);
  PosteriorSummary summary = posterior_summary(trace);
  const fs::path out = fs::path(config.out_dir) / "summary.json";
  atomic_write_text(out, summary_to_json(summary, trace).dump(2) + "\n");
  if (!quiet)
    std::cout << "summary of " << trace.draws.size() << " draws -> " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynamic tensor autoregression: simulation, Bayesian fitting, impulse responses"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  std::string trace_arg;
  std::uint64_t seed_override = 0;
  bool seed_set = false;
  int chains_override = 0;
  bool quiet = false;

  app.add_option("--config", config_path, "path to the JSON run configuration")->required();
  app.add_option("--seed", seed_override, "override the config seed")
      ->each([&](const std::string&) { seed_set = true; });
  app.add_option("--out", out_override, "override the output directory");
  app.add_option("--chains", chains_override, "override the chain count");
  app.add_flag("--quiet", quiet, "suppress progress output");

  auto* sim = app.add_subcommand("simulate", "generate a stable model and synthetic series");
  auto* fit = app.add_subcommand("fit", "run the Gibbs sampler on a tensor series");
  auto* irf = app.add_subcommand("irf", "impulse-response grids from a posterior trace");
  auto* summ = app.add_subcommand("summarize", "posterior summary of an existing trace");
  summ->add_option("--trace", trace_arg, "trace file (default: <out>/trace_chain0.ndjson)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  std::signal(SIGINT, handle_sigint);

  try {
    RunConfig config = load_config(config_path);
    if (seed_set) config.sampler.seed = seed_override;
    if (!out_override.empty()) config.out_dir = out_override;
    if (chains_override > 0) config.chains = chains_override;

    if (sim->parsed()) return command_simulate(config, quiet);
    if (fit->parsed()) return command_fit(config, quiet);
    if (irf->parsed()) return command_irf(config, quiet);
    if (summ->parsed()) return command_summarize(config, trace_arg, quiet);
    return 2;
  } catch (const UserAbort&) {
    std::cerr << "aborted\n";
    return 130;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
