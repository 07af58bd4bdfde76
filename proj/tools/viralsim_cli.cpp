// viralsim: scaling sweeps for social-graph file dissemination over a
// wireless square.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "viralsim/viralsim.hpp"

namespace {

using namespace viralsim;

const std::vector<std::string> kConfigKeys = {
    "mode",    "n_list",  "seeds",      "base_seed", "beta",          "K",           "m",
    "dbar",    "M",       "m_scale",    "P",         "N0",            "gamma",       "alpha",
    "epsilon", "epsilon_prime", "sigma", "L",        "F",             "kappa",       "cell_side",
    "stripe_height", "slot_limit", "wan_rate", "hop_budget", "lower_bound", "share_by_receivers",
    "output_dir", "threads"};

struct ConfigFlags {
	std::string file;
	std::map<std::string, std::string> values;
};

void add_config_flags(CLI::App* app, ConfigFlags& flags) {
	app->add_option("-c,--config", flags.file, "key = value config file")->check(CLI::ExistingFile);
	for (const auto& key : kConfigKeys) {
		app->add_option("--" + key, flags.values[key], "overrides '" + key + "'");
	}
}

ExperimentConfig resolve(const ConfigFlags& flags) {
	ExperimentConfig c;
	if (!flags.file.empty()) {
		std::ifstream f(flags.file);
		c = parse_config(f);
	}
	for (const auto& [key, value] : flags.values) {
		if (!value.empty()) {
			set_config_value(c, key, value);
		}
	}
	apply_env_overrides(c);
	c.validate();
	return c;
}

std::map<Mode, ScalingFit> fit_all(const std::vector<RunRecord>& records, bool raw) {
	std::map<Mode, std::vector<RunRecord>> by_mode;
	for (const auto& r : records) {
		by_mode[r.mode].push_back(r);
	}
	std::map<Mode, ScalingFit> fits;
	for (const auto& [mode, recs] : by_mode) {
		const bool corrected = !raw && (mode == Mode::LbOnly || mode == Mode::Geography);
		try {
			fits.emplace(mode, fit_scaling(recs, corrected));
		} catch (const std::invalid_argument& e) {
			std::cerr << to_string(mode) << ": " << e.what() << '\n';
		}
	}
	return fits;
}

void print_fits(const std::map<Mode, ScalingFit>& fits) {
	for (const auto& [mode, fit] : fits) {
		std::printf("%-12s exponent %.4f  r2 %.4f  %s\n", to_string(mode), fit.exponent, fit.r_squared,
		            fit.log_corrected ? "(T / F log^2 n)" : "(raw T)");
		for (std::size_t i = 0; i < fit.sizes.size(); ++i) {
			std::printf("    n=%-8zu median %.6g  iqr [%.6g, %.6g]\n", fit.sizes[i], fit.medians[i], fit.q25[i],
			            fit.q75[i]);
		}
	}
}

int cmd_run(const ConfigFlags& flags, bool write_nodes) {
	const auto cfg = resolve(flags);
	const auto records = run_experiment(cfg);
	int flagged = 0;
	for (const auto& r : records) {
		std::printf("%s n=%zu seed=%d T=%.6g%s%s\n", to_string(r.mode), r.n, r.seed_index, r.T,
		            r.flagged ? " FLAGGED" : "", r.error.empty() ? "" : (" error: " + r.error).c_str());
		flagged += r.flagged ? 1 : 0;
		if (write_nodes && r.run) {
			std::ofstream f(std::filesystem::path(cfg.output_dir) /
			                ("nodes_" + std::string(to_string(r.mode)) + "_n" + std::to_string(r.n) + "_s" +
			                 std::to_string(r.seed_index) + ".csv"));
			write_nodes_csv(f, *r.run);
		}
	}
	if (cfg.n_list.size() >= 3) {
		print_fits(fit_all(records, false));
	}
	std::printf("%zu runs, %d flagged, results in %s\n", records.size(), flagged, cfg.output_dir.c_str());
	return flagged == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
	CLI::App app{"viralsim: file dissemination over social and wireless networks"};
	app.require_subcommand(1);

	ConfigFlags run_flags;
	bool write_nodes = false;
	auto* run_cmd = app.add_subcommand("run", "run an experiment sweep");
	add_config_flags(run_cmd, run_flags);
	run_cmd->add_flag("--nodes-csv", write_nodes, "also write one per-node CSV per run");

	std::string fit_in = "results";
	bool fit_raw = false;
	auto* fit_cmd = app.add_subcommand("fit", "log-log exponent fit over stored results");
	fit_cmd->add_option("--in", fit_in, "results directory")->check(CLI::ExistingDirectory);
	fit_cmd->add_flag("--raw", fit_raw, "fit raw T without the log^2 n correction");

	std::string plot_in = "results";
	std::string plot_out = "plots";
	auto* plot_cmd = app.add_subcommand("plot-data", "series, fit and heatmap CSVs from stored results");
	plot_cmd->add_option("--in", plot_in, "results directory")->check(CLI::ExistingDirectory);
	plot_cmd->add_option("--out", plot_out, "output directory");

	LemmaGateOptions gates;
	auto* lemma_cmd = app.add_subcommand("validate-lemmas", "Monte-Carlo gates for placement and graph lemmas");
	lemma_cmd->add_option("--trials", gates.trials, "trials per gate")->check(CLI::Range(500, 1000000));
	lemma_cmd->add_option("--seed", gates.seed, "base seed");
	lemma_cmd->add_option("--beta", gates.beta, "power-law exponent");
	lemma_cmd->add_option("--K", gates.K, "minimum weight factor (m = K ln n)");

	CLI11_PARSE(app, argc, argv);

	try {
		if (*run_cmd) {
			return cmd_run(run_flags, write_nodes);
		}
		if (*fit_cmd) {
			const auto fits = fit_all(load_results(fit_in), fit_raw);
			print_fits(fits);
			return fits.empty() ? 1 : 0;
		}
		if (*plot_cmd) {
			const auto records = load_results(plot_in);
			for (const auto& p : emit_plots(records, fit_all(records, false), plot_out)) {
				std::printf("wrote %s\n", p.string().c_str());
			}
			return 0;
		}
		if (*lemma_cmd) {
			bool ok = true;
			for (const auto& g : validate_lemmas(gates)) {
				std::printf("%-22s %s  statistic %.4f  threshold %.4f  (%s)\n", g.name.c_str(),
				            g.passed ? "PASS" : "FAIL", g.statistic, g.threshold, g.detail.c_str());
				ok = ok && g.passed;
			}
			return ok ? 0 : 1;
		}
	} catch (const std::exception& e) {
		std::cerr << "error: " << e.what() << '\n';
		return 2;
	}
	return 0;
}
