// Acceptance run: prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails. An optional argument names a directory that
// receives the sweep series and heatmap CSVs.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "naive_simulator.hpp"
#include "viralsim/viralsim.hpp"

using namespace viralsim;

namespace {

// Pinned tolerances.
constexpr double kLbExponentLo = 0.35;
constexpr double kLbExponentHi = 0.65;
constexpr double kMinRSquared = 0.9;
constexpr double kGeoExponentMargin = 0.02;
constexpr int kGeoWinsRequired = 8;
constexpr double kLowerBoundExponentLo = 0.3;
constexpr double kLowerBoundExponentHi = 0.6;
constexpr double kWanExponentTol = 1e-12;
constexpr int kNaiveInstances = 50;
constexpr std::size_t kMarginalN = 200;
constexpr int kMarginalTrials = 10'000;
constexpr double kMarginalSigmas = 3.0;
constexpr double kMarginalOutsideFraction = 0.01;  // null rate for 3 sigma is 0.27%
constexpr int kSinrRuns = 20;

int failures = 0;

void report(int id, bool ok, const std::string& what, const std::string& detail) {
	std::printf("%s criterion %d: %s | %s\n", ok ? "PASS" : "FAIL", id, what.c_str(), detail.c_str());
	std::fflush(stdout);
	failures += ok ? 0 : 1;
}

std::string fmt(const char* f, auto... args) {
	char buf[512];
	std::snprintf(buf, sizeof buf, f, args...);
	return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
	return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<RunRecord> at_size(const std::vector<RunRecord>& recs, std::size_t n) {
	std::vector<RunRecord> out;
	for (const auto& r : recs) {
		if (r.n == n) out.push_back(r);
	}
	return out;
}

std::vector<RunRecord> lower_bound_series(const std::vector<RunRecord>& recs) {
	std::vector<RunRecord> out;
	for (auto r : recs) {
		if (r.lower_bound && r.error.empty()) {
			r.T = r.lower_bound->time_bound;
			out.push_back(std::move(r));
		}
	}
	return out;
}

double median_T(const std::vector<RunRecord>& recs) {
	std::vector<double> v;
	for (const auto& r : recs) v.push_back(r.T);
	return quantile(v, 0.5);
}

bool all_completed(const std::vector<RunRecord>& recs, std::string& why) {
	for (const auto& r : recs) {
		if (!r.error.empty() || r.flagged || !r.run || !r.run->completed) {
			why = fmt("%s n=%zu seed=%d not completed: %s", to_string(r.mode), r.n, r.seed_index, r.error.c_str());
			return false;
		}
	}
	return true;
}

void check_fanout(const std::vector<const std::vector<RunRecord>*>& sweeps) {
	bool ok = true;
	int lb_max = 0;
	int geo_max = 0;
	std::size_t runs = 0;
	for (const auto* s : sweeps) {
		for (const auto& r : *s) {
			if (!r.run) {
				ok = false;
				continue;
			}
			++runs;
			const int limit = r.mode == Mode::LbOnly ? 4 : 6;
			ok = ok && r.run->fanout_violations == 0 && r.run->max_fanout <= limit && r.run->fanout_limit == limit;
			(r.mode == Mode::LbOnly ? lb_max : geo_max) = std::max(r.mode == Mode::LbOnly ? lb_max : geo_max,
			                                                       r.run->max_fanout);
		}
	}
	report(1, ok, "fan-out bound", fmt("%zu runs, max receivers per transmitter lb=%d (<=4) geography=%d (<=6)", runs,
	                                   lb_max, geo_max));
}

void check_depth(const std::vector<const std::vector<RunRecord>*>& sweeps) {
	bool ok = true;
	std::size_t depth_bad = 0;
	int worst_slack = std::numeric_limits<int>::max();
	int max_depth = 0;
	for (const auto* s : sweeps) {
		for (const auto& r : *s) {
			if (!r.run) {
				ok = false;
				continue;
			}
			const int cap = static_cast<int>(std::ceil(std::log2(static_cast<double>(r.n))));
			depth_bad += r.run->tree_depth_violations;
			max_depth = std::max(max_depth, r.run->max_tree_depth);
			worst_slack = std::min(worst_slack, cap - r.run->max_wait_generations);
			ok = ok && r.run->tree_depth_violations == 0 && r.run->max_wait_generations <= cap;
		}
	}
	report(2, ok, "tree depth and wait bound",
	       fmt("depth violations %zu, max tree depth %d, min slack of wait vs ceil(log2 n) %d", depth_bad, max_depth,
	           worst_slack));
}

void check_naive_and_marginals() {
	bool sims_ok = true;
	int compared = 0;
	for (int k = 0; compared < kNaiveInstances; ++k) {
		const Seed seed = mix_seed({31337, static_cast<std::uint64_t>(k)});
		CounterStream r(seed);
		const std::size_t n = 8 + uniform_below(r, 25);
		auto g = generate(powerlaw_with_min_weight(n, 2.8, 1.5 + 2.0 * uniform01(r), 0.9), mix_seed({seed, 1}));
		auto pl = place_uniform(n, mix_seed({seed, 2}));
		auto giant = giant_component(g);
		if (giant.size() < 2) continue;
		const NodeId source = giant[uniform_below(r, giant.size())];
		AlgorithmParams p;
		p.D = diameter_estimate(g, giant);
		p.F = 1.0 + static_cast<double>(uniform_below(r, 3));
		if (k % 2 == 1) {
			p.epsilon = 0.3;
			p.L = pl.side() * (0.3 + 0.5 * uniform01(r));
		}
		RoutingParams rp;
		rp.cell_side = 1.0 + static_cast<double>(uniform_below(r, 3));
		const Slot limit = 20000;
		auto fast = run(g, pl, p, rp, source, limit, seed);
		naive::Config nc{p.epsilon, p.L, p.D, p.F, rp.kappa, rp.cell_side};
		sims_ok = sims_ok && fast.completion_slots() == naive::simulate(g, pl, nc, source, seed, limit);
		++compared;
	}

	const auto seq = powerlaw_with_min_weight(kMarginalN, 2.5, 3.0);
	const std::size_t n = kMarginalN;
	std::vector<int> skip(n * n, 0);
	std::vector<int> pairs(n * n, 0);
	auto tally = [n](const SocialGraph& g, std::vector<int>& into) {
		for (NodeId i = 0; i < n; ++i) {
			for (NodeId j : g.neighbors(i)) {
				if (i < j) ++into[i * n + j];
			}
		}
	};
	for (int t = 0; t < kMarginalTrials; ++t) {
		tally(generate(seq, mix_seed({4040, static_cast<std::uint64_t>(t)})), skip);
		tally(generate_all_pairs(seq, mix_seed({5050, static_cast<std::uint64_t>(t)})), pairs);
	}
	const double vol = seq.vol();
	const double trials = kMarginalTrials;
	std::size_t outside = 0;
	std::size_t total = 0;
	double sum_skip = 0.0;
	double sum_pairs = 0.0;
	double var_sum = 0.0;
	for (NodeId i = 0; i < n; ++i) {
		for (NodeId j = i + 1; j < n; ++j) {
			const double p = std::min(1.0, seq.weights[i] * seq.weights[j] / vol);
			const double a = skip[i * n + j];
			const double b = pairs[i * n + j];
			sum_skip += a;
			sum_pairs += b;
			var_sum += 2.0 * trials * p * (1.0 - p);
			const double sigma = std::sqrt(2.0 * p * (1.0 - p) / trials);
			const double diff = std::abs(a - b) / trials;
			++total;
			if (sigma == 0.0 ? diff != 0.0 : diff > kMarginalSigmas * sigma) ++outside;
		}
	}
	const double frac = static_cast<double>(outside) / static_cast<double>(total);
	const double z_total = (sum_skip - sum_pairs) / std::sqrt(var_sum);
	const bool marg_ok = frac <= kMarginalOutsideFraction && std::abs(z_total) <= kMarginalSigmas;
	report(8, sims_ok && marg_ok, "oracle equivalence",
	       fmt("naive simulator %s on %d instances; edge marginals: %.4f of pairs beyond 3 sigma (<= %.2f), total-edge "
	           "z %.2f",
	           sims_ok ? "identical" : "DIFFERS", compared, frac, kMarginalOutsideFraction, z_total));
}

void check_bit_meters() {
	bool ok = true;
	std::size_t slots = 0;
	double worst = 0.0;
	ChannelParams ch;
	for (std::size_t n : {128u, 256u}) {
		const double budget = bit_meter_budget(ch, n);
		for (int s = 0; s < kSinrRuns; ++s) {
			auto pl = place_uniform(n, mix_seed({700, n, static_cast<std::uint64_t>(s)}));
			CounterStream r(mix_seed({701, n, static_cast<std::uint64_t>(s)}));
			std::vector<Demand> dem;
			std::vector<bool> used(n, false);
			while (dem.size() < n / 4) {
				auto a = static_cast<NodeId>(uniform_below(r, n));
				auto b = static_cast<NodeId>(uniform_below(r, n));
				if (a == b || used[a] || used[b]) continue;
				used[a] = used[b] = true;
				dem.push_back({a, b});
			}
			auto trace = sinr_backend_run(ch, pl, dem, kDefaultKappaMin, 1.0, 1'000'000);
			ok = ok && trace.finished;
			for (double bm : trace.bit_meters_per_slot) {
				++slots;
				worst = std::max(worst, bm / budget);
				ok = ok && bm <= budget;
			}
		}
	}
	report(9, ok, "bit-meter budget in SINR backend",
	       fmt("%zu slots over %d runs, max realized/budget %.4f", slots, 2 * kSinrRuns, worst));
}

}  // namespace

int main(int argc, char** argv) {
	const auto t_start = std::chrono::steady_clock::now();
	const std::vector<std::size_t> sizes{1024, 2048, 4096, 8192, 16384};
	const std::size_t largest = sizes.back();

	// Sweep A: constant minimum weight, load-balanced mode.
	ExperimentConfig a;
	a.mode = Mode::LbOnly;
	a.n_list = sizes;
	a.seeds = 10;
	a.beta = 3.5;
	a.m = 4.0;
	auto t0 = std::chrono::steady_clock::now();
	const auto sweep_a = run_experiment(a, false);
	std::printf("# sweep A (lb-only, m=4): %zu runs in %.1f s\n", sweep_a.size(), seconds_since(t0));

	// Sweep B: minimum weight 10 log n, geography mode and an LB control on
	// the same instances.
	ExperimentConfig b = a;
	b.K = 10.0;
	b.mode = Mode::Geography;
	b.epsilon = 0.08;
	t0 = std::chrono::steady_clock::now();
	const auto sweep_geo = run_experiment(b, false);
	std::printf("# sweep B geography (m=10 ln n): %zu runs in %.1f s\n", sweep_geo.size(), seconds_since(t0));
	b.mode = Mode::LbOnly;
	t0 = std::chrono::steady_clock::now();
	const auto sweep_ctl = run_experiment(b, false);
	std::printf("# sweep B lb control: %zu runs in %.1f s\n", sweep_ctl.size(), seconds_since(t0));

	std::string why;
	const bool complete =
	    all_completed(sweep_a, why) && all_completed(sweep_geo, why) && all_completed(sweep_ctl, why);
	if (!complete) std::printf("# incomplete run: %s\n", why.c_str());

	const std::vector<const std::vector<RunRecord>*> sweeps{&sweep_a, &sweep_geo, &sweep_ctl};
	check_fanout(sweeps);
	check_depth(sweeps);

	// 3: corrected exponent of the LB sweep.
	const auto fit_a = fit_scaling(sweep_a, true, a.F);
	const auto raw_a = fit_scaling(sweep_a, false);
	report(3, complete && fit_a.exponent >= kLbExponentLo && fit_a.exponent <= kLbExponentHi &&
	              fit_a.r_squared >= kMinRSquared,
	       "LB-mode scaling of T/(F log^2 n)",
	       fmt("exponent %.4f in [%.2f, %.2f]? r^2 %.4f (>= %.2f); raw T exponent %.4f", fit_a.exponent, kLbExponentLo,
	           kLbExponentHi, fit_a.r_squared, kMinRSquared, raw_a.exponent));

	// 4: geography against LB on the same instances.
	const auto fit_geo = fit_scaling(sweep_geo, true, b.F);
	const auto fit_ctl = fit_scaling(sweep_ctl, true, b.F);
	int wins = 0;
	const auto geo_big = at_size(sweep_geo, largest);
	const auto ctl_big = at_size(sweep_ctl, largest);
	for (std::size_t i = 0; i < geo_big.size() && i < ctl_big.size(); ++i) {
		wins += geo_big[i].T < ctl_big[i].T ? 1 : 0;
	}
	double L_big = 0.0;
	int depth_big = 0;
	for (const auto& r : geo_big) {
		if (r.run) {
			L_big += r.run->L / static_cast<double>(geo_big.size());
			depth_big = std::max(depth_big, r.run->search_depth);
		}
	}
	report(4,
	       complete && fit_geo.exponent <= fit_ctl.exponent - kGeoExponentMargin && wins >= kGeoWinsRequired,
	       "geography improvement over LB",
	       fmt("exponent geography %.4f vs lb %.4f (need gap >= %.2f); geography faster at n=%zu in %d/10 seeds "
	           "(need %d); median T %.0f vs %.0f; mean L %.1f on side %.1f, search depth %d",
	           fit_geo.exponent, fit_ctl.exponent, kGeoExponentMargin, largest, wins, kGeoWinsRequired,
	           median_T(geo_big), median_T(ctl_big), L_big, std::sqrt(static_cast<double>(largest)), depth_big));

	// 5: soundness everywhere, exponent of the hop-2 curve on sweep A.
	std::size_t violations = 0;
	std::size_t checked = 0;
	double tightest = 0.0;
	for (const auto* s : sweeps) {
		for (const auto& r : *s) {
			if (!r.lower_bound) {
				++violations;
				continue;
			}
			++checked;
			tightest = std::max(tightest, r.lower_bound->time_bound / r.T);
			violations += r.lower_bound->time_bound <= r.T ? 0 : 1;
		}
	}
	const auto fit_lb = fit_scaling(lower_bound_series(sweep_a), false);
	report(5,
	       violations == 0 && fit_lb.exponent >= kLowerBoundExponentLo && fit_lb.exponent <= kLowerBoundExponentHi,
	       "lower-bound soundness and exponent",
	       fmt("%zu violations over %zu instances (max bound/T %.3g); hop-2 bound exponent %.4f in [%.1f, %.1f]",
	           violations, checked, tightest, fit_lb.exponent, kLowerBoundExponentLo, kLowerBoundExponentHi));

	// 6: WAN contrast.
	std::vector<std::pair<std::size_t, double>> wan_pts;
	for (auto n : sizes) wan_pts.emplace_back(n, wan_baseline(n, a.F, a.kappa));
	const auto fit_wan = fit_points(wan_pts, false);
	int lb_faster = 0;
	const auto a_big = at_size(sweep_a, largest);
	double wan_median = 0.0;
	{
		std::vector<double> w;
		for (const auto& r : a_big) {
			const double wan = wan_baseline(r.giant_size - 1, a.F, a.kappa);
			w.push_back(wan);
			lb_faster += r.T < wan ? 1 : 0;
		}
		wan_median = quantile(w, 0.5);
	}
	report(6,
	       std::abs(fit_wan.exponent - 1.0) <= kWanExponentTol &&
	           lb_faster == static_cast<int>(a_big.size()) && !a_big.empty(),
	       "WAN contrast",
	       fmt("WAN exponent %.15f; LB faster than WAN at n=%zu in %d/%zu seeds (median %.0f vs %.0f)",
	           fit_wan.exponent, largest, lb_faster, a_big.size(), median_T(a_big), wan_median));

	// 7: statistical lemma gates.
	t0 = std::chrono::steady_clock::now();
	const auto gates = validate_lemmas();
	bool gates_ok = true;
	std::string gate_detail;
	for (const auto& g : gates) {
		gates_ok = gates_ok && g.passed;
		gate_detail += fmt("%s %s %.4f vs %.2f; ", g.name.c_str(), g.passed ? "ok" : "FAILED", g.statistic, g.threshold);
	}
	gate_detail += fmt("%.1f s", seconds_since(t0));
	report(7, gates_ok, "lemma gates", gate_detail);

	check_naive_and_marginals();
	check_bit_meters();

	// 10: determinism, rerunning the smallest cells of both sweeps.
	bool same = true;
	for (int s = 0; s < a.seeds; ++s) {
		same = same && to_json(run_cell(a, sizes.front(), s)).dump() == to_json(sweep_a[s]).dump();
		ExperimentConfig g = b;
		g.mode = Mode::Geography;
		same = same && to_json(run_cell(g, sizes.front(), s)).dump() == to_json(sweep_geo[s]).dump();
	}
	report(10, same, "determinism", fmt("%d cells rerun at n=%zu, summaries byte-identical: %s", 2 * a.seeds,
	                                    sizes.front(), same ? "yes" : "no"));

	if (argc > 1) {
		std::vector<RunRecord> all = sweep_a;
		all.insert(all.end(), sweep_geo.begin(), sweep_geo.end());
		emit_plots(all, {{Mode::LbOnly, fit_a}, {Mode::Geography, fit_geo}}, std::filesystem::path(argv[1]));
	}

	std::printf("# %d of 10 criteria failed, %.1f s total\n", failures, seconds_since(t_start));
	return failures == 0 ? 0 : 1;
}
