#ifndef VIRALSIM_LOWERBOUND_HPP
#define VIRALSIM_LOWERBOUND_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "json.hpp"
#include "viralsim/channel.hpp"
#include "viralsim/geometry.hpp"
#include "viralsim/socialgraph.hpp"

namespace viralsim {

struct LowerBoundReport {
	double transport_load = 0.0;   // bit-meters
	double budget_per_slot = 0.0;  // bit-meters per slot
	double time_bound = 0.0;       // slots
	int hop_budget = 2;
	double fraction_without_close_neighbor = 0.0;
	double close_radius = 0.0;
	std::size_t m_set_size = 0;
};

namespace detail {

/// Nearest (Euclidean) node among those within `hops` social hops of i,
/// excluding i. Infinity when the ball holds no other node. `stamp` and
/// `frontier` are scratch space reused across calls.
inline double nearest_in_ball(const SocialGraph& g, const Placement& pl, NodeId i, int hops,
                              std::vector<std::uint32_t>& stamp, std::uint32_t tag, std::vector<NodeId>& frontier,
                              std::vector<NodeId>& next) {
	const Point origin = pl[i];
	double best = std::numeric_limits<double>::infinity();
	frontier.assign(1, i);
	stamp[i] = tag;
	for (int d = 1; d <= hops && !frontier.empty(); ++d) {
		next.clear();
		for (NodeId u : frontier) {
			for (NodeId v : g.neighbors(u)) {
				if (stamp[v] != tag) {
					stamp[v] = tag;
					best = std::min(best, euclidean(origin, pl[v]));
					if (d < hops) {
						next.push_back(v);
					}
				}
			}
		}
		frontier.swap(next);
	}
	return best;
}

}  // namespace detail

/// Per-node distance to the geographically nearest node within hop_budget
/// social hops, for every member of `component` except the source.
inline std::vector<double> nearest_eligible_distances(const SocialGraph& g, const Placement& pl,
                                                      std::span<const NodeId> component, NodeId source,
                                                      int hop_budget) {
	if (hop_budget < 1) {
		throw std::invalid_argument("hop_budget must be at least 1");
	}
	if (g.size() != pl.size()) {
		throw std::invalid_argument("graph and placement sizes differ");
	}
	std::vector<std::uint32_t> stamp(g.size(), 0);
	std::vector<NodeId> frontier;
	std::vector<NodeId> next;
	std::vector<double> out;
	out.reserve(component.size());
	std::uint32_t tag = 0;
	for (NodeId i : component) {
		if (i == source) {
			continue;
		}
		out.push_back(detail::nearest_in_ball(g, pl, i, hop_budget, stamp, ++tag, frontier, next));
	}
	return out;
}

/// Minimum bit-meters to deliver F bits to every component member except
/// the source when each downloads straight from its nearest eligible node.
inline double transport_load(const SocialGraph& g, const Placement& pl, std::span<const NodeId> component,
                             NodeId source, double F, int hop_budget) {
	double total = 0.0;
	for (double d : nearest_eligible_distances(g, pl, component, source, hop_budget)) {
		if (std::isfinite(d)) {
			total += F * d;
		}
	}
	return total;
}

/// Expected-degree band [K log n, 2K log n] membership over the component.
inline std::size_t m_set_size(const SocialGraph& g, std::span<const NodeId> component, double K) {
	const double ln = std::log(static_cast<double>(g.size()));
	const double lo = K * ln;
	const double hi = 2.0 * K * ln;
	return static_cast<std::size_t>(std::count_if(component.begin(), component.end(), [&](NodeId i) {
		const double w = g.weight(i);
		return w >= lo && w <= hi;
	}));
}

/// Weight-ceiling term W used by the neighborhood upper bound.
inline double neighborhood_weight_ceiling(double beta, std::size_t n) {
	const double ln = std::log(static_cast<double>(n));
	if (beta <= 3.0) {
		throw std::invalid_argument("neighborhood_weight_ceiling: beta must exceed 3");
	}
	if (beta <= 4.0) {
		return std::pow(ln, beta / (beta - 3.0));
	}
	return std::max(std::pow(ln, 5.0 / (beta - 4.0)), ln * ln);
}

struct LowerBoundOptions {
	double K = 0.0;             // band for the M-set; 0 derives it from the smallest weight
	double close_radius = 0.0;  // 0 derives it from W, dtilde and eps_prime
	double epsilon_prime = 0.0;
};

inline LowerBoundReport lower_bound_time(const SocialGraph& g, const Placement& pl, const ChannelParams& ch,
                                         std::span<const NodeId> component, NodeId source, double F,
                                         int hop_budget, const LowerBoundOptions& opt = {}) {
	LowerBoundReport rep;
	rep.hop_budget = hop_budget;
	const auto dists = nearest_eligible_distances(g, pl, component, source, hop_budget);
	for (double d : dists) {
		if (std::isfinite(d)) {
			rep.transport_load += F * d;
		}
	}
	rep.budget_per_slot = bit_meter_budget(ch, g.size());
	rep.time_bound = rep.transport_load / rep.budget_per_slot;

	const double n = static_cast<double>(g.size());
	const double ln = std::log(n);
	double K = opt.K;
	if (K <= 0.0 && !g.degseq().weights.empty() && ln > 0.0) {
		K = *std::min_element(g.degseq().weights.begin(), g.degseq().weights.end()) / ln;
	}
	rep.close_radius = opt.close_radius;
	if (rep.close_radius <= 0.0) {
		const double beta = g.degseq().params ? g.degseq().params->beta : 3.5;
		const double W = beta > 3.0 ? neighborhood_weight_ceiling(beta, g.size()) : ln * ln;
		double vol = 0.0;
		double vol2 = 0.0;
		for (NodeId i = 0; i < g.size(); ++i) {
			vol += g.weight(i);
			vol2 += g.weight(i) * g.weight(i);
		}
		const double dt = vol > 0.0 ? vol2 / vol : 1.0;
		rep.close_radius =
		    std::sqrt(n / (2.0 * std::numbers::pi * W * dt * dt * std::pow(n, 4.0 * opt.epsilon_prime)));
	}
	std::size_t in_m = 0;
	std::size_t lacking = 0;
	const double lo = K * ln;
	const double hi = 2.0 * K * ln;
	std::size_t k = 0;
	for (NodeId i : component) {
		if (i == source) {
			continue;
		}
		const double w = g.weight(i);
		if (w >= lo && w <= hi) {
			++in_m;
			if (!(dists[k] < rep.close_radius)) {
				++lacking;
			}
		}
		++k;
	}
	rep.m_set_size = in_m;
	rep.fraction_without_close_neighbor = in_m > 0 ? static_cast<double>(lacking) / static_cast<double>(in_m) : 0.0;
	return rep;
}

inline nlohmann::ordered_json to_json(const LowerBoundReport& r) {
	nlohmann::ordered_json j;
	j["transport_load"] = r.transport_load;
	j["budget_per_slot"] = r.budget_per_slot;
	j["time_bound"] = r.time_bound;
	j["hop_budget"] = r.hop_budget;
	j["fraction_without_close_neighbor"] = r.fraction_without_close_neighbor;
	j["close_radius"] = r.close_radius;
	j["m_set_size"] = r.m_set_size;
	return j;
}

}  // namespace viralsim

#endif  // VIRALSIM_LOWERBOUND_HPP
