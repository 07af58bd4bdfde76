#ifndef VIRALSIM_HARNESS_HPP
#define VIRALSIM_HARNESS_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "json.hpp"
#include "viralsim/channel.hpp"
#include "viralsim/geometry.hpp"
#include "viralsim/lowerbound.hpp"
#include "viralsim/protocol.hpp"
#include "viralsim/rng.hpp"
#include "viralsim/routing.hpp"
#include "viralsim/socialgraph.hpp"

namespace viralsim {

enum class Mode : std::uint8_t { LbOnly, Geography, WanBaseline, LowerBound };

inline const char* to_string(Mode m) noexcept {
	switch (m) {
	case Mode::LbOnly: return "lb-only";
	case Mode::Geography: return "geography";
	case Mode::WanBaseline: return "wan-baseline";
	case Mode::LowerBound: return "lower-bound";
	}
	return "?";
}

inline Mode parse_mode(const std::string& s) {
	for (Mode m : {Mode::LbOnly, Mode::Geography, Mode::WanBaseline, Mode::LowerBound}) {
		if (s == to_string(m)) {
			return m;
		}
	}
	throw std::invalid_argument("unknown mode '" + s + "'");
}

struct ExperimentConfig {
	Mode mode = Mode::LbOnly;
	std::vector<std::size_t> n_list{1024, 2048, 4096, 8192, 16384};
	int seeds = 10;
	Seed base_seed = 1;

	// Social graph: minimum weight m = K ln n when K > 0, else the absolute
	// m when m > 0, else the explicit (dbar, M) pair.
	double beta = 3.5;
	double K = 0.0;
	double m = 4.0;
	double dbar = 0.0;
	double M = 0.0;
	double m_scale = 0.5;  // M = m_scale * sqrt(n * dbar) when solving from m

	ChannelParams channel;

	double epsilon = 0.08;       // geography mode only; LB mode forces 0
	double epsilon_prime = 0.0;  // 0 means epsilon / 2
	double sigma = 0.0;          // 0 means calibrate per instance
	double L = 0.0;              // 0 means the default threshold formula
	double F = 1.0;
	double kappa = 1.0;
	double cell_side = 4.0;
	double stripe_height = 0.0;
	Slot slot_limit = 50'000'000;
	double wan_rate = 1.0;
	int hop_budget = 0;  // 0 means 2 for LB mode, floor(4 eps log_dtilde n + 2) for geography
	bool lower_bound = true;
	bool share_by_receivers = false;

	std::string output_dir = "results";
	int threads = 1;

	double eps_prime() const noexcept { return epsilon_prime > 0.0 ? epsilon_prime : epsilon / 2.0; }

	void validate() const {
		if (n_list.empty()) {
			throw std::invalid_argument("n_list is empty");
		}
		for (std::size_t i = 0; i < n_list.size(); ++i) {
			if (n_list[i] < 2 || (i > 0 && n_list[i] <= n_list[i - 1])) {
				throw std::invalid_argument("n_list must be strictly increasing with every n >= 2");
			}
		}
		if (seeds < 1) {
			throw std::invalid_argument("seeds must be at least 1");
		}
		if (!(beta > 2.0)) {
			throw std::invalid_argument("beta must exceed 2");
		}
		if (K <= 0.0 && m <= 0.0 && !(dbar > 0.0 && M > 0.0)) {
			throw std::invalid_argument("need K, m, or both dbar and M");
		}
		channel.validate();
		if (!(F > 0.0) || !(kappa > 0.0) || !(cell_side >= 1.0) || !(wan_rate > 0.0)) {
			throw std::invalid_argument("F, kappa, wan_rate must be positive and cell_side >= 1");
		}
		if (!(epsilon >= 0.0 && epsilon <= 0.5)) {
			throw std::invalid_argument("epsilon must lie in [0, 0.5]");
		}
		if (mode == Mode::Geography && epsilon_prime > 0.0 && !(epsilon_prime < epsilon)) {
			throw std::invalid_argument("epsilon_prime must be below epsilon");
		}
		if (slot_limit <= 0 || threads < 1 || hop_budget < 0) {
			throw std::invalid_argument("slot_limit and threads must be positive, hop_budget non-negative");
		}
	}
};

namespace detail {

inline std::string trim(std::string s) {
	const auto ws = " \t\r\n";
	s.erase(0, s.find_first_not_of(ws));
	s.erase(s.find_last_not_of(ws) + 1);
	return s;
}

inline bool parse_bool(const std::string& v) {
	if (v == "1" || v == "true" || v == "yes" || v == "on") {
		return true;
	}
	if (v == "0" || v == "false" || v == "no" || v == "off") {
		return false;
	}
	throw std::invalid_argument("not a boolean: '" + v + "'");
}

inline std::vector<std::size_t> parse_size_list(const std::string& v) {
	std::vector<std::size_t> out;
	std::stringstream ss(v);
	std::string item;
	while (std::getline(ss, item, ',')) {
		item = trim(item);
		if (!item.empty()) {
			out.push_back(static_cast<std::size_t>(std::stoull(item)));
		}
	}
	return out;
}

inline double parse_double(const std::string& v) {
	if (v == "inf" || v == "infinity") {
		return std::numeric_limits<double>::infinity();
	}
	std::size_t used = 0;
	const double d = std::stod(v, &used);
	if (used != v.size()) {
		throw std::invalid_argument("not a number: '" + v + "'");
	}
	return d;
}

}  // namespace detail

/// Sets one field by its config-file name. Unknown keys are an error.
inline void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& raw) {
	const std::string v = detail::trim(raw);
	using detail::parse_double;
	if (key == "mode") c.mode = parse_mode(v);
	else if (key == "n_list") c.n_list = detail::parse_size_list(v);
	else if (key == "seeds") c.seeds = std::stoi(v);
	else if (key == "base_seed") c.base_seed = std::stoull(v);
	else if (key == "beta") c.beta = parse_double(v);
	else if (key == "K") c.K = parse_double(v);
	else if (key == "m") c.m = parse_double(v);
	else if (key == "dbar") c.dbar = parse_double(v);
	else if (key == "M") c.M = parse_double(v);
	else if (key == "m_scale") c.m_scale = parse_double(v);
	else if (key == "P") c.channel.P = parse_double(v);
	else if (key == "N0") c.channel.N0 = parse_double(v);
	else if (key == "gamma") c.channel.gamma = parse_double(v);
	else if (key == "alpha") c.channel.alpha = parse_double(v);
	else if (key == "epsilon") c.epsilon = parse_double(v);
	else if (key == "epsilon_prime") c.epsilon_prime = parse_double(v);
	else if (key == "sigma") c.sigma = parse_double(v);
	else if (key == "L") c.L = parse_double(v);
	else if (key == "F") c.F = parse_double(v);
	else if (key == "kappa") c.kappa = parse_double(v);
	else if (key == "cell_side") c.cell_side = parse_double(v);
	else if (key == "stripe_height") c.stripe_height = parse_double(v);
	else if (key == "slot_limit") c.slot_limit = std::stoll(v);
	else if (key == "wan_rate") c.wan_rate = parse_double(v);
	else if (key == "hop_budget") c.hop_budget = std::stoi(v);
	else if (key == "lower_bound") c.lower_bound = detail::parse_bool(v);
	else if (key == "share_by_receivers") c.share_by_receivers = detail::parse_bool(v);
	else if (key == "output_dir") c.output_dir = v;
	else if (key == "threads") c.threads = std::stoi(v);
	else throw std::invalid_argument("unknown config key '" + key + "'");
}

/// Flat "key = value" text; '#' starts a comment.
inline ExperimentConfig parse_config(std::istream& is, ExperimentConfig base = {}) {
	std::string line;
	int lineno = 0;
	while (std::getline(is, line)) {
		++lineno;
		if (auto hash = line.find('#'); hash != std::string::npos) {
			line.erase(hash);
		}
		line = detail::trim(line);
		if (line.empty()) {
			continue;
		}
		const auto eq = line.find('=');
		if (eq == std::string::npos) {
			throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
		}
		try {
			set_config_value(base, detail::trim(line.substr(0, eq)), line.substr(eq + 1));
		} catch (const std::exception& e) {
			throw std::invalid_argument("config line " + std::to_string(lineno) + ": " + e.what());
		}
	}
	return base;
}

/// Applies the output-directory environment override, if set.
inline void apply_env_overrides(ExperimentConfig& c) {
	if (const char* dir = std::getenv("VIRALSIM_OUTPUT_DIR"); dir != nullptr && *dir != '\0') {
		c.output_dir = dir;
	}
}

inline DegreeSequence degree_sequence_for(const ExperimentConfig& c, std::size_t n) {
	if (c.K > 0.0) {
		return powerlaw_with_min_weight(n, c.beta, c.K * std::log(static_cast<double>(n)), c.m_scale);
	}
	if (c.m > 0.0) {
		return powerlaw_with_min_weight(n, c.beta, c.m, c.m_scale);
	}
	return powerlaw_weights(n, c.beta, c.dbar, c.M);
}

/// One (n, seed) cell: placement, graph, component and source, all derived
/// from the base seed.
struct Instance {
	std::size_t n = 0;
	int seed_index = 0;
	Placement placement;
	SocialGraph graph;
	std::vector<NodeId> giant;
	NodeId source = 0;
	Seed protocol_seed = 0;
	double dtilde = 0.0;
	int D = 0;
};

inline Instance make_instance(const ExperimentConfig& c, std::size_t n, int seed_index) {
	const auto idx = static_cast<std::uint64_t>(seed_index);
	Instance in{n,
	            seed_index,
	            place_uniform(n, mix_seed({c.base_seed, n, idx, 1})),
	            generate(degree_sequence_for(c, n), mix_seed({c.base_seed, n, idx, 2})),
	            {},
	            0,
	            mix_seed({c.base_seed, n, idx, 4}),
	            0.0,
	            0};
	in.giant = giant_component(in.graph);
	CounterStream pick(mix_seed({c.base_seed, n, idx, 3}));
	in.source = in.giant[uniform_below(pick, in.giant.size())];
	double vol = 0.0;
	double vol2 = 0.0;
	for (double w : in.graph.degseq().weights) {
		vol += w;
		vol2 += w * w;
	}
	in.dtilde = vol2 / vol;
	in.D = diameter_estimate(in.graph, in.giant);
	return in;
}

/// sigma from the measured neighborhood size: median number of nodes within
/// max(1, floor(eps log_dtilde n)) hops of sampled component members,
/// divided by n^eps'.
inline double calibrate_sigma(const Instance& in, double epsilon, double epsilon_prime, int samples = 32) {
	const double n = static_cast<double>(in.n);
	const double logd = in.dtilde > 1.0 ? std::log(n) / std::log(in.dtilde) : std::log(n);
	const int radius = std::max(1, static_cast<int>(std::floor(epsilon * logd)));
	CounterStream pick(mix_seed({in.protocol_seed, 0x5167a1ULL}));
	std::vector<double> sizes;
	for (int s = 0; s < samples; ++s) {
		const NodeId root = in.giant[uniform_below(pick, in.giant.size())];
		std::size_t count = 0;
		for (const auto& shell : bfs_neighborhood(in.graph, root, radius)) {
			count += shell.size();
		}
		sizes.push_back(static_cast<double>(count));
	}
	std::nth_element(sizes.begin(), sizes.begin() + static_cast<std::ptrdiff_t>(sizes.size() / 2), sizes.end());
	return sizes[sizes.size() / 2] / std::pow(n, epsilon_prime);
}

struct RunRecord {
	Mode mode = Mode::LbOnly;
	std::size_t n = 0;
	int seed_index = 0;
	double T = 0.0;
	bool flagged = false;
	std::string error;
	std::size_t giant_size = 0;
	double dtilde = 0.0;
	int D = 0;
	double sigma = 0.0;
	std::optional<RunResult> run;
	std::optional<LowerBoundReport> lower_bound;
	// Heatmap payload, kept when records are reloaded from disk.
	std::uint32_t grid_dim = 0;
	std::vector<std::uint32_t> cell_peaks;
};

inline int auto_hop_budget(const ExperimentConfig& c, Mode mode, const Instance& in) {
	if (c.hop_budget > 0) {
		return c.hop_budget;
	}
	if (mode == Mode::Geography) {
		const double logd = std::log(static_cast<double>(in.n)) / std::log(in.dtilde);
		return static_cast<int>(std::floor(4.0 * c.epsilon * logd + 2.0));
	}
	return 2;
}

inline AlgorithmParams algorithm_params_for(const ExperimentConfig& c, Mode mode, const Instance& in,
                                            double* sigma_out = nullptr) {
	AlgorithmParams ap;
	ap.F = c.F;
	ap.D = in.D;
	ap.share_by_receivers = c.share_by_receivers;
	if (mode == Mode::Geography) {
		ap.epsilon = c.epsilon;
		ap.epsilon_prime = c.eps_prime();
		ap.sigma = c.sigma > 0.0 ? c.sigma : calibrate_sigma(in, c.epsilon, ap.epsilon_prime);
		ap.L = c.L > 0.0 ? c.L : default_L(in.n, ap.epsilon_prime, ap.sigma);
		if (sigma_out != nullptr) {
			*sigma_out = ap.sigma;
		}
	}
	return ap;
}

/// Runs one mode on a prepared instance.
inline RunRecord run_on(const ExperimentConfig& c, Mode mode, const Instance& in) {
	RunRecord rec;
	rec.mode = mode;
	rec.n = in.n;
	rec.seed_index = in.seed_index;
	rec.giant_size = in.giant.size();
	rec.dtilde = in.dtilde;
	rec.D = in.D;
	try {
		switch (mode) {
		case Mode::WanBaseline:
			rec.T = wan_baseline(in.giant.size() - 1, c.F, c.wan_rate);
			break;
		case Mode::LowerBound: {
			LowerBoundOptions opt;
			opt.epsilon_prime = c.eps_prime();
			rec.lower_bound = lower_bound_time(in.graph, in.placement, c.channel, in.giant, in.source, c.F,
			                                   auto_hop_budget(c, Mode::LbOnly, in), opt);
			rec.T = rec.lower_bound->time_bound;
			break;
		}
		case Mode::LbOnly:
		case Mode::Geography: {
			RoutingParams rp;
			rp.kappa = c.kappa;
			rp.cell_side = c.cell_side;
			rp.stripe_height = c.stripe_height;
			const auto ap = algorithm_params_for(c, mode, in, &rec.sigma);
			rec.run = run(in.graph, in.placement, ap, rp, in.source, c.slot_limit, in.protocol_seed);
			rec.T = static_cast<double>(rec.run->T);
			rec.flagged = rec.run->flagged;
			rec.grid_dim = rec.run->grid_dim;
			rec.cell_peaks = rec.run->cell_peaks;
			if (c.lower_bound) {
				LowerBoundOptions opt;
				opt.epsilon_prime = mode == Mode::Geography ? c.eps_prime() : 0.0;
				rec.lower_bound = lower_bound_time(in.graph, in.placement, c.channel, in.giant, in.source, c.F,
				                                   auto_hop_budget(c, mode, in), opt);
			}
			break;
		}
		}
	} catch (const std::exception& e) {
		rec.error = e.what();
		rec.flagged = true;
	}
	return rec;
}

inline RunRecord run_cell(const ExperimentConfig& c, std::size_t n, int seed_index) {
	try {
		return run_on(c, c.mode, make_instance(c, n, seed_index));
	} catch (const std::exception& e) {
		RunRecord rec;
		rec.mode = c.mode;
		rec.n = n;
		rec.seed_index = seed_index;
		rec.error = e.what();
		rec.flagged = true;
		return rec;
	}
}

inline nlohmann::ordered_json to_json(const RunRecord& r) {
	nlohmann::ordered_json j;
	j["mode"] = to_string(r.mode);
	j["n"] = r.n;
	j["seed_index"] = r.seed_index;
	j["T"] = r.T;
	j["flagged"] = r.flagged;
	if (!r.error.empty()) {
		j["error"] = r.error;
	}
	j["giant_size"] = r.giant_size;
	j["dtilde"] = r.dtilde;
	j["D"] = r.D;
	if (r.mode == Mode::Geography) {
		j["sigma"] = r.sigma;
	}
	if (r.run) {
		j["run"] = summary_json(*r.run);
	}
	if (r.lower_bound) {
		j["lower_bound"] = to_json(*r.lower_bound);
	}
	if (r.grid_dim > 0) {
		j["grid_dim"] = r.grid_dim;
		j["cell_peaks"] = r.cell_peaks;
	}
	return j;
}

inline RunRecord record_from_json(const nlohmann::json& j) {
	RunRecord r;
	r.mode = parse_mode(j.at("mode").get<std::string>());
	r.n = j.at("n").get<std::size_t>();
	r.seed_index = j.at("seed_index").get<int>();
	r.T = j.at("T").get<double>();
	r.flagged = j.at("flagged").get<bool>();
	r.error = j.value("error", std::string{});
	r.giant_size = j.value("giant_size", std::size_t{0});
	r.dtilde = j.value("dtilde", 0.0);
	r.D = j.value("D", 0);
	r.sigma = j.value("sigma", 0.0);
	if (j.contains("lower_bound")) {
		const auto& lb = j["lower_bound"];
		LowerBoundReport rep;
		rep.transport_load = lb.at("transport_load").get<double>();
		rep.budget_per_slot = lb.at("budget_per_slot").get<double>();
		rep.time_bound = lb.at("time_bound").get<double>();
		rep.hop_budget = lb.at("hop_budget").get<int>();
		rep.fraction_without_close_neighbor = lb.at("fraction_without_close_neighbor").get<double>();
		rep.close_radius = lb.at("close_radius").get<double>();
		rep.m_set_size = lb.at("m_set_size").get<std::size_t>();
		r.lower_bound = rep;
	}
	r.grid_dim = j.value("grid_dim", std::uint32_t{0});
	if (j.contains("cell_peaks")) {
		r.cell_peaks = j["cell_peaks"].get<std::vector<std::uint32_t>>();
	}
	return r;
}

inline std::string result_filename(const RunRecord& r) {
	return std::string(to_string(r.mode)) + "_n" + std::to_string(r.n) + "_s" + std::to_string(r.seed_index) +
	       ".json";
}

/// Every (n, seed) cell of the config, in (n, seed) order. Cells may run on
/// several threads; each owns its instance and results are stored by index.
/// With write_files, one JSON document per cell lands in output_dir.
inline std::vector<RunRecord> run_experiment(const ExperimentConfig& c, bool write_files = true) {
	c.validate();
	std::vector<std::pair<std::size_t, int>> cells;
	for (auto n : c.n_list) {
		for (int s = 0; s < c.seeds; ++s) {
			cells.emplace_back(n, s);
		}
	}
	std::vector<RunRecord> out(cells.size());
	std::atomic<std::size_t> next{0};
	auto worker = [&] {
		for (std::size_t k = next++; k < cells.size(); k = next++) {
			out[k] = run_cell(c, cells[k].first, cells[k].second);
		}
	};
	const int threads = std::min<int>(c.threads, static_cast<int>(cells.size()));
	if (threads <= 1) {
		worker();
	} else {
		std::vector<std::jthread> pool;
		for (int t = 0; t < threads; ++t) {
			pool.emplace_back(worker);
		}
	}
	if (write_files) {
		std::filesystem::create_directories(c.output_dir);
		for (const auto& r : out) {
			std::ofstream f(std::filesystem::path(c.output_dir) / result_filename(r));
			if (!f) {
				throw std::runtime_error("cannot write results to " + c.output_dir);
			}
			f << to_json(r).dump(2) << '\n';
		}
	}
	return out;
}

inline std::vector<RunRecord> load_results(const std::string& dir) {
	std::vector<std::filesystem::path> files;
	for (const auto& e : std::filesystem::directory_iterator(dir)) {
		if (e.is_regular_file() && e.path().extension() == ".json") {
			files.push_back(e.path());
		}
	}
	std::sort(files.begin(), files.end());
	std::vector<RunRecord> out;
	for (const auto& p : files) {
		std::ifstream f(p);
		auto j = nlohmann::json::parse(f, nullptr, false);
		if (j.is_discarded() || !j.is_object() || !j.contains("mode")) {
			continue;
		}
		out.push_back(record_from_json(j));
	}
	std::sort(out.begin(), out.end(), [](const RunRecord& a, const RunRecord& b) {
		return std::tie(a.mode, a.n, a.seed_index) < std::tie(b.mode, b.n, b.seed_index);
	});
	return out;
}

/// Linear-interpolated quantile of an unsorted sample.
inline double quantile(std::vector<double> v, double q) {
	if (v.empty()) {
		throw std::invalid_argument("quantile of empty sample");
	}
	std::sort(v.begin(), v.end());
	const double pos = q * static_cast<double>(v.size() - 1);
	const auto lo = static_cast<std::size_t>(std::floor(pos));
	const auto hi = std::min(lo + 1, v.size() - 1);
	return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct ScalingFit {
	double exponent = 0.0;
	double intercept = 0.0;
	double r_squared = 0.0;
	bool log_corrected = false;
	std::vector<std::size_t> sizes;
	std::vector<double> medians;  // of the raw value
	std::vector<double> q25;
	std::vector<double> q75;
};

/// Least squares of log(median value / (F log^2 n)) on log n when
/// log_correction is set, otherwise of log(median value) on log n.
inline ScalingFit fit_points(const std::vector<std::pair<std::size_t, double>>& points, bool log_correction,
                             double F = 1.0) {
	std::map<std::size_t, std::vector<double>> by_n;
	for (const auto& [n, v] : points) {
		by_n[n].push_back(v);
	}
	if (by_n.size() < 3) {
		throw std::invalid_argument("fit_scaling: need at least 3 distinct sizes");
	}
	ScalingFit fit;
	fit.log_corrected = log_correction;
	std::vector<double> xs;
	std::vector<double> ys;
	for (const auto& [n, vals] : by_n) {
		const double med = quantile(vals, 0.5);
		fit.sizes.push_back(n);
		fit.medians.push_back(med);
		fit.q25.push_back(quantile(vals, 0.25));
		fit.q75.push_back(quantile(vals, 0.75));
		const double ln = std::log(static_cast<double>(n));
		const double y = log_correction ? med / (F * ln * ln) : med;
		if (!(y > 0.0)) {
			throw std::invalid_argument("fit_scaling: non-positive median");
		}
		xs.push_back(ln);
		ys.push_back(std::log(y));
	}
	const double k = static_cast<double>(xs.size());
	double mx = 0.0;
	double my = 0.0;
	for (std::size_t i = 0; i < xs.size(); ++i) {
		mx += xs[i];
		my += ys[i];
	}
	mx /= k;
	my /= k;
	double sxx = 0.0;
	double sxy = 0.0;
	double syy = 0.0;
	for (std::size_t i = 0; i < xs.size(); ++i) {
		sxx += (xs[i] - mx) * (xs[i] - mx);
		sxy += (xs[i] - mx) * (ys[i] - my);
		syy += (ys[i] - my) * (ys[i] - my);
	}
	fit.exponent = sxy / sxx;
	fit.intercept = my - fit.exponent * mx;
	fit.r_squared = syy > 0.0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 1.0;
	return fit;
}

inline ScalingFit fit_scaling(const std::vector<RunRecord>& results, bool log_correction, double F = 1.0) {
	std::vector<std::pair<std::size_t, double>> pts;
	for (const auto& r : results) {
		if (r.error.empty()) {
			pts.emplace_back(r.n, r.T);
		}
	}
	return fit_points(pts, log_correction, F);
}

/// Writes series_<mode>.csv (n,median_T,q25,q75,mode) per mode present,
/// fits.csv when fits are given, and a load heatmap for the largest run of
/// each simulated mode. Returns the files written.
inline std::vector<std::filesystem::path> emit_plots(const std::vector<RunRecord>& results,
                                                     const std::map<Mode, ScalingFit>& fits,
                                                     const std::filesystem::path& dir,
                                                     std::vector<Mode> modes = {}) {
	std::filesystem::create_directories(dir);
	std::vector<std::filesystem::path> written;
	if (modes.empty()) {
		for (const auto& r : results) {
			if (std::find(modes.begin(), modes.end(), r.mode) == modes.end()) {
				modes.push_back(r.mode);
			}
		}
	}
	auto open = [&](const std::filesystem::path& p) {
		std::ofstream f(p);
		if (!f) {
			throw std::runtime_error("cannot write " + p.string());
		}
		written.push_back(p);
		return f;
	};
	for (Mode mode : modes) {
		auto f = open(dir / (std::string("series_") + to_string(mode) + ".csv"));
		f << "n,median_T,q25,q75,mode\n";
		std::map<std::size_t, std::vector<double>> by_n;
		const RunRecord* largest = nullptr;
		for (const auto& r : results) {
			if (r.mode != mode || !r.error.empty()) {
				continue;
			}
			by_n[r.n].push_back(r.T);
			if (r.grid_dim > 0 && (largest == nullptr || r.n > largest->n ||
			                       (r.n == largest->n && r.seed_index < largest->seed_index))) {
				largest = &r;
			}
		}
		f.precision(17);
		for (const auto& [n, vals] : by_n) {
			f << n << ',' << quantile(vals, 0.5) << ',' << quantile(vals, 0.25) << ',' << quantile(vals, 0.75) << ','
			  << to_string(mode) << '\n';
		}
		if (largest != nullptr) {
			auto h = open(dir / ("heatmap_" + std::string(to_string(mode)) + "_n" + std::to_string(largest->n) + "_s" +
			                     std::to_string(largest->seed_index) + ".csv"));
			h << "row,col,flow_count\n";
			for (std::uint32_t r = 0; r < largest->grid_dim; ++r) {
				for (std::uint32_t c = 0; c < largest->grid_dim; ++c) {
					h << r << ',' << c << ',' << largest->cell_peaks[static_cast<std::size_t>(r) * largest->grid_dim + c]
					  << '\n';
				}
			}
		}
	}
	if (!fits.empty()) {
		auto f = open(dir / "fits.csv");
		f << "mode,exponent,intercept,r_squared,log_corrected\n";
		f.precision(17);
		for (const auto& [mode, fit] : fits) {
			f << to_string(mode) << ',' << fit.exponent << ',' << fit.intercept << ',' << fit.r_squared << ','
			  << (fit.log_corrected ? 1 : 0) << '\n';
		}
	}
	return written;
}

// Statistical gates for the placement and random-graph lemmas.

struct GateResult {
	std::string name;
	double statistic = 0.0;  // observed failure (or success) rate
	double threshold = 0.0;
	bool passed = false;
	std::string detail;
};

struct LemmaGateOptions {
	int trials = 500;
	Seed seed = 12345;
	std::size_t n_geometry = 4096;
	std::size_t k_candidates = 256;
	std::size_t n_degree = 4096;
	std::size_t n_growth = 10000;
	int growth_roots = 200;
	std::size_t n_mset = 4096;
	int mset_seeds = 20;
	double beta = 3.5;
	double K = 10.0;
};

/// Min distance from one node to k uniform others exceeds
/// sqrt(64 n log n / (pi k)) in at most 1% of trials.
inline GateResult gate_min_distance(const LemmaGateOptions& o) {
	const double n = static_cast<double>(o.n_geometry);
	const double radius = std::sqrt(64.0 * n * std::log(n) / (std::numbers::pi * static_cast<double>(o.k_candidates)));
	std::vector<NodeId> cand(o.k_candidates);
	std::iota(cand.begin(), cand.end(), NodeId{1});
	int fails = 0;
	for (int t = 0; t < o.trials; ++t) {
		auto pl = place_uniform(o.n_geometry, mix_seed({o.seed, 3, static_cast<std::uint64_t>(t)}));
		if (!nearest_within(pl, 0, cand, radius)) {
			++fails;
		}
	}
	GateResult g{"min-distance", static_cast<double>(fails) / o.trials, 0.01, false, ""};
	g.passed = g.statistic <= g.threshold;
	g.detail = "radius " + std::to_string(radius);
	return g;
}

/// A square of area 10 log n at a random position holds >= 2A nodes in at
/// most 1% of trials.
inline GateResult gate_rectangle_count(const LemmaGateOptions& o) {
	const double n = static_cast<double>(o.n_geometry);
	const double area = 10.0 * std::log(n);
	const double s = std::sqrt(area);
	int fails = 0;
	for (int t = 0; t < o.trials; ++t) {
		const Seed sd = mix_seed({o.seed, 4, static_cast<std::uint64_t>(t)});
		auto pl = place_uniform(o.n_geometry, sd);
		CounterStream pos(sd ^ 0xa5a5a5a5ULL);
		const double x0 = uniform01(pos) * (pl.side() - s);
		const double y0 = uniform01(pos) * (pl.side() - s);
		if (static_cast<double>(count_in_rectangle(pl, {x0, y0, x0 + s, y0 + s})) >= 2.0 * area) {
			++fails;
		}
	}
	GateResult g{"rectangle-count", static_cast<double>(fails) / o.trials, 0.01, false, ""};
	g.passed = g.statistic <= g.threshold;
	g.detail = "area " + std::to_string(area);
	return g;
}

/// A node of weight w >= 10 log n has realized degree in (w/2, 2w) in at
/// least 99% of trials. Uses the minimum-weight node of a power-law
/// sequence whose smallest weight is exactly 10 log n.
inline GateResult gate_degree_concentration(const LemmaGateOptions& o) {
	const double n = static_cast<double>(o.n_degree);
	const auto seq = powerlaw_with_min_weight(o.n_degree, o.beta, 10.0 * std::log(n));
	const NodeId probe = static_cast<NodeId>(o.n_degree - 1);
	const double w = seq.weights[probe];
	int fails = 0;
	for (int t = 0; t < o.trials; ++t) {
		auto g = generate(seq, mix_seed({o.seed, 5, static_cast<std::uint64_t>(t)}));
		const double deg = static_cast<double>(g.degree(probe));
		if (!(deg > w / 2.0 && deg < 2.0 * w)) {
			++fails;
		}
	}
	GateResult g{"degree-concentration", static_cast<double>(fails) / o.trials, 0.01, false, ""};
	g.passed = g.statistic <= g.threshold;
	g.detail = "w " + std::to_string(w);
	return g;
}

/// Shell-volume growth ratio vol(S_{i+1}) / vol(S_i) within [dtilde/2,
/// 2 dtilde] for at least 90% of sampled (root, step) pairs, over
/// max(1, floor(0.08 log_dtilde n)) steps.
inline GateResult gate_growth_ratio(const LemmaGateOptions& o) {
	const double n = static_cast<double>(o.n_growth);
	const auto seq = powerlaw_with_min_weight(o.n_growth, o.beta, o.K * std::log(n));
	auto g = generate(seq, mix_seed({o.seed, 6}));
	const auto giant = giant_component(g);
	double vol = 0.0;
	double vol2 = 0.0;
	for (double w : seq.weights) {
		vol += w;
		vol2 += w * w;
	}
	const double dt = vol2 / vol;
	const int depth = std::max(1, static_cast<int>(std::floor(0.08 * std::log(n) / std::log(dt))));
	CounterStream pick(mix_seed({o.seed, 7}));
	int inside = 0;
	int total = 0;
	for (int r = 0; r < o.growth_roots; ++r) {
		const NodeId root = giant[uniform_below(pick, giant.size())];
		const auto prof = neighborhood_growth_profile(g, root, depth);
		for (int i = 0; i < depth; ++i) {
			const double ratio = prof[static_cast<std::size_t>(i) + 1] / prof[static_cast<std::size_t>(i)];
			inside += (ratio >= dt / 2.0 && ratio <= 2.0 * dt) ? 1 : 0;
			++total;
		}
	}
	GateResult res{"growth-ratio", static_cast<double>(inside) / total, 0.90, false, ""};
	res.passed = res.statistic >= res.threshold;
	res.detail = "dtilde " + std::to_string(dt) + ", depth " + std::to_string(depth);
	return res;
}

/// Fraction of component nodes with expected degree in [K log n, 2K log n]
/// within 10% (relative) of 1 - 2^(1-beta), averaged over seeds.
inline GateResult gate_m_set_fraction(const LemmaGateOptions& o) {
	const double n = static_cast<double>(o.n_mset);
	const auto seq = powerlaw_with_min_weight(o.n_mset, o.beta, o.K * std::log(n));
	double sum = 0.0;
	for (int s = 0; s < o.mset_seeds; ++s) {
		auto g = generate(seq, mix_seed({o.seed, 8, static_cast<std::uint64_t>(s)}));
		const auto giant = giant_component(g);
		sum += static_cast<double>(m_set_size(g, giant, o.K)) / n;
	}
	const double mean = sum / o.mset_seeds;
	const double expected = 1.0 - std::pow(2.0, 1.0 - o.beta);
	GateResult res{"m-set-fraction", std::abs(mean - expected) / expected, 0.10, false, ""};
	res.passed = res.statistic <= res.threshold;
	res.detail = "mean " + std::to_string(mean) + " vs " + std::to_string(expected);
	return res;
}

inline std::vector<GateResult> validate_lemmas(const LemmaGateOptions& o = {}) {
	return {gate_min_distance(o), gate_rectangle_count(o), gate_degree_concentration(o), gate_growth_ratio(o),
	        gate_m_set_fraction(o)};
}

}  // namespace viralsim

#endif  // VIRALSIM_HARNESS_HPP
