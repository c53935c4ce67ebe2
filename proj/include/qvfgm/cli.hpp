#pragma once

// Command-line surface. Kept in a header so the tests can drive it without
// spawning processes.

#include <iomanip>
#include <iostream>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "qvfgm/qvfgm.hpp"

namespace qvfgm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

namespace detail {

inline void print_summary(std::ostream& out, const std::vector<ParameterSummary>& rows, const ModelParams* truth) {
  out << std::left << std::setw(10) << "parameter" << std::right << std::setw(12) << "mean" << std::setw(12) << "sd"
      << std::setw(12) << "2.5%" << std::setw(12) << "97.5%" << std::setw(8) << "psrf";
  if (truth) out << std::setw(12) << "truth" << std::setw(8) << "cover";
  out << '\n';
  const auto pairs = truth ? edge_pairs(truth->nodes()) : std::vector<std::pair<int, int>>{};
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& s = rows[r];
    out << std::left << std::setw(10) << s.name << std::right << std::fixed << std::setprecision(4) << std::setw(12)
        << s.mean << std::setw(12) << s.sd << std::setw(12) << s.q025 << std::setw(12) << s.q975 << std::setprecision(3)
        << std::setw(8) << s.psrf;
    if (truth) {
      const double t = r == 0 ? truth->s0 : r == 1 ? truth->c0 : truth->edge_intensity(pairs[r - 2].first, pairs[r - 2].second);
      out << std::setprecision(4) << std::setw(12) << t << std::setw(8) << (s.q025 <= t && t <= s.q975 ? "yes" : "no");
    }
    out << '\n';
  }
  out.unsetf(std::ios::floatfield);
}

inline nlohmann::json report_json(const std::vector<verify::OracleReport>& reports) {
  auto arr = nlohmann::json::array();
  for (const auto& r : reports) {
    arr.push_back({{"check", r.check_name},
                   {"target", r.target_value},
                   {"estimate", r.estimate},
                   {"mc_standard_error", r.mc_standard_error},
                   {"tolerance", r.tolerance},
                   {"se_multiplier", r.se_multiplier},
                   {"pass", r.pass}});
  }
  return arr;
}

}  // namespace detail

/// Runs one command line; returns the process exit status.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Exponential-family graphical models with quadratic variance function"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Forward-simulate a dataset and write the truth file");
  std::string model_path, preset, data_out, truth_out;
  int n = 500;
  std::uint64_t sim_seed = 1;
  unsigned threads = 0;
  auto* model_opt = sim->add_option("--model", model_path, "Model file (key = value)")->check(CLI::ExistingFile);
  sim->add_option("--preset", preset, "Built-in model")->check(CLI::IsMember({"five-region"}))->excludes(model_opt);
  sim->add_option("-n,--replicates", n, "Number of replicates")->check(CLI::PositiveNumber);
  sim->add_option("--seed", sim_seed, "Random seed");
  sim->add_option("--threads", threads, "Worker threads (0 = hardware)");
  sim->add_option("-o,--out", data_out, "Dataset CSV")->required();
  sim->add_option("--truth", truth_out, "Truth (model) file");

  // fit
  auto* fit = app.add_subcommand("fit", "Run the Gibbs sampler and persist posterior samples");
  std::string config_path, fit_data, fit_out, fit_family;
  std::vector<std::string> overrides;
  fit->add_option("-c,--config", config_path, "Run configuration file")->check(CLI::ExistingFile);
  fit->add_option("-d,--data", fit_data, "Dataset CSV (overrides 'input')");
  fit->add_option("-o,--out", fit_out, "Samples directory (overrides 'output')");
  fit->add_option("--family", fit_family, "Family (overrides 'family')");
  fit->add_option("--set", overrides, "key=value override, repeatable");

  // summarize
  auto* summ = app.add_subcommand("summarize", "Posterior summaries and interval table");
  std::string samples_dir, summ_truth;
  summ->add_option("samples", samples_dir, "Samples directory")->required()->check(CLI::ExistingDirectory);
  summ->add_option("--truth", summ_truth, "Truth file for coverage")->check(CLI::ExistingFile);

  // export-graph
  auto* exp = app.add_subcommand("export-graph", "Write the normalised network as DOT and JSON");
  std::string exp_samples, exp_model, exp_prefix;
  double threshold = 5.0;
  auto* es = exp->add_option("--samples", exp_samples, "Samples directory")->check(CLI::ExistingDirectory);
  exp->add_option("--model", exp_model, "Model file instead of samples")->check(CLI::ExistingFile)->excludes(es);
  exp->add_option("-o,--out", exp_prefix, "Output prefix (writes .dot and .json)")->required();
  exp->add_option("--threshold", threshold, "Display threshold on the 0-100 scale")->check(CLI::Range(0.0, 100.0));

  // mse
  auto* mse = app.add_subcommand("mse", "Posterior expected predictive MSE");
  std::vector<std::string> mse_samples;
  std::string mse_data;
  std::uint64_t mse_seed = 1;
  mse->add_option("samples", mse_samples, "Samples directories, one per fitted family")->required()->check(CLI::ExistingDirectory);
  mse->add_option("-d,--data", mse_data, "Dataset CSV (default: the fitted input)");
  mse->add_option("--seed", mse_seed, "Seed for the predictive draws");

  // check
  auto* chk = app.add_subcommand("check", "Run the verification oracles");
  std::string chk_family = "normal", chk_json;
  std::uint64_t chk_seed = 1;
  int chk_reps = 20000;
  chk->add_option("--family", chk_family, "Family");
  chk->add_option("--seed", chk_seed, "Seed");
  chk->add_option("--replicates", chk_reps, "Monte Carlo replicates")->check(CLI::Range(10000, 100000000));
  chk->add_option("--json", chk_json, "Write the machine-readable report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*sim) {
      if (model_path.empty() && preset.empty()) {
        err << "error: simulate needs --model or --preset\n";
        return kExitUsage;
      }
      const ModelParams params = preset.empty() ? io::load_model(model_path) : five_region_params();
      const auto result = simulate(params, n, sim_seed, threads);
      io::save_dataset(data_out, result.data);
      if (!truth_out.empty()) io::save_model(truth_out, params);
      out << "wrote " << n << " x " << params.nodes() << " dataset to " << data_out << '\n';
      return kExitOk;
    }

    if (*fit) {
      io::RunConfig cfg = config_path.empty() ? io::RunConfig{} : io::RunConfig::load(config_path);
      try {
        if (!fit_family.empty()) cfg.set("family", fit_family);
        for (const auto& o : overrides) cfg.apply_override(o);
      } catch (const io::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
      }
      if (!fit_data.empty()) cfg.input = fit_data;
      if (!fit_out.empty()) cfg.output_dir = fit_out;
      if (cfg.input.empty()) {
        err << "error: no input dataset (use --data or 'input' in the config)\n";
        return kExitUsage;
      }
      const Dataset data = io::prepare_dataset(io::parse_dataset(io::detail::read_file(cfg.input)), cfg);
      const auto samples = run_chains(data, cfg.family, cfg.prior, cfg.mcmc);
      nlohmann::json run_info;
      run_info["input"] = cfg.input;
      run_info["standardize_plus3"] = cfg.standardize_plus3;
      run_info["reciprocal_transform"] = cfg.reciprocal_transform;
      run_info["config"] = cfg.canonical();
      io::persist_samples(samples, cfg.output_dir, cfg.hash(), run_info);
      detail::print_summary(out, summarize(samples), nullptr);
      for (std::size_t c = 0; c < samples.chains.size(); ++c) {
        const auto& ch = samples.chains[c];
        out << "chain " << c + 1 << " acceptance: s0 " << ch.accept_s0 << ", c0 " << ch.accept_c0;
        if (cfg.family == FamilyKind::InverseGamma) out << ", links " << ch.accept_links;
        out << '\n';
      }
      out << "samples written to " << cfg.output_dir << '\n';
      return kExitOk;
    }

    if (*summ) {
      const auto samples = io::load_samples(samples_dir);
      ModelParams truth;
      if (!summ_truth.empty()) truth = io::load_model(summ_truth);
      if (!summ_truth.empty() && truth.nodes() != samples.nodes()) {
        err << "error: truth file has " << truth.nodes() << " nodes, samples have " << samples.nodes() << '\n';
        return kExitRuntime;
      }
      detail::print_summary(out, summarize(samples), summ_truth.empty() ? nullptr : &truth);
      return kExitOk;
    }

    if (*exp) {
      if (exp_samples.empty() == exp_model.empty()) {
        err << "error: export-graph needs exactly one of --samples or --model\n";
        return kExitUsage;
      }
      io::NetworkExport net;
      if (!exp_samples.empty()) {
        const auto samples = io::load_samples(exp_samples);
        net = io::build_network(io::posterior_mean_intensity(samples), samples.node_names, threshold);
      } else {
        const auto params = io::load_model(exp_model);
        net = io::build_network(params.edge_intensity, {}, threshold);
      }
      io::export_network(net, exp_prefix);
      for (const auto& e : net.edges) {
        out << e.from << " -- " << e.to << "  " << io::format_number2(e.normalized)
            << (e.normalized >= threshold ? "" : "  (hidden)") << '\n';
      }
      return kExitOk;
    }

    if (*mse) {
      out << std::left << std::setw(16) << "family" << std::right << std::setw(14) << "mse" << '\n';
      for (const auto& dir : mse_samples) {
        const auto samples = io::load_samples(dir);
        const auto manifest = io::load_manifest(dir);
        const auto run_info = manifest.value("run", nlohmann::json::object());
        io::RunConfig cfg;
        cfg.family = samples.family;
        cfg.standardize_plus3 = run_info.value("standardize_plus3", false);
        cfg.reciprocal_transform = run_info.value("reciprocal_transform", false);
        const std::string path = mse_data.empty() ? run_info.value("input", std::string{}) : mse_data;
        if (path.empty()) {
          err << "error: " << dir << " records no input; pass --data\n";
          return kExitUsage;
        }
        const Dataset data = io::prepare_dataset(io::parse_dataset(io::detail::read_file(path)), cfg);
        const auto result = predictive_mse(samples, data, mse_seed);
        out << std::left << std::setw(16) << to_string(samples.family) << std::right << std::setw(14)
            << std::setprecision(6) << result.posterior_mean << '\n';
      }
      return kExitOk;
    }

    if (*chk) {
      const auto family = parse_family(chk_family);
      if (!family) {
        err << "error: unknown family '" << chk_family << "'\n";
        return kExitUsage;
      }
      std::vector<verify::OracleReport> reports;
      auto add = [&](std::vector<verify::OracleReport> r) { reports.insert(reports.end(), r.begin(), r.end()); };
      ModelParams params;
      params.family = *family;
      params.c0 = 10.0;
      params.s0 = *family == FamilyKind::Beta ? 4.0 : 6.0;
      params.edge_intensity = uniform_intensity(3, integer_intensity(*family) ? 3.0 : std::exp(1.0));
      set_edge(params.edge_intensity, 0, 1, 0.0);
      if (*family != FamilyKind::GSSt) {
        add(verify::mc_moment_check(params, chk_reps, chk_seed));
        add(verify::mc_correlation_check(params, chk_reps, chk_seed + 1));
        add(verify::conditional_consistency_check(*family, {}, chk_seed + 2));
      }
      const double w = *family == FamilyKind::Beta ? 0.3 : *family == FamilyKind::Normal || *family == FamilyKind::GSSt ? 0.4 : 1.3;
      add(verify::density_normalization_check(*family, params.s0, params.c0, w, integer_intensity(*family) ? 4.0 : 2.5));
      out << std::left << std::setw(48) << "check" << std::right << std::setw(14) << "target" << std::setw(14)
          << "estimate" << std::setw(6) << "" << '\n';
      for (const auto& r : reports) {
        out << std::left << std::setw(48) << r.check_name << std::right << std::setprecision(6) << std::setw(14)
            << r.target_value << std::setw(14) << r.estimate << std::setw(6) << (r.pass ? "ok" : "FAIL") << '\n';
      }
      if (!chk_json.empty()) {
        nlohmann::json j;
        j["family"] = std::string(to_string(*family));
        j["seed"] = chk_seed;
        j["pass"] = verify::all_pass(reports);
        j["checks"] = detail::report_json(reports);
        io::detail::write_file(chk_json, j.dump(2) + "\n");
      }
      return verify::all_pass(reports) ? kExitOk : kExitRuntime;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace qvfgm::cli
